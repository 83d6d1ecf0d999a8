#!/usr/bin/env python3
"""Embedding backend for transformer checkpoints.

Reads one {"text": ...} object per line, runs the encoder frozen, and writes a
raw little-endian float64 matrix (count x 768) plus a JSON sidecar next to it.
Inputs longer than the model window are truncated from the tail (the head of
the text is kept).
"""
import argparse
import json
import sys

import numpy as np


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", required=True)
    ap.add_argument("--encoder-id", required=True)
    ap.add_argument("--pooling", choices=["first_token", "mean"], default="first_token")
    ap.add_argument("--input", required=True)
    ap.add_argument("--output", required=True)
    ap.add_argument("--batch-size", type=int, default=16)
    args = ap.parse_args()

    try:
        import torch
        from transformers import AutoModel, AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(args.model)
        model = AutoModel.from_pretrained(args.model)
    except Exception as exc:  # noqa: BLE001
        print(f"cannot load checkpoint {args.model}: {exc}", file=sys.stderr)
        return 1
    model.eval()

    with open(args.input, encoding="utf-8") as fh:
        texts = [json.loads(line)["text"] for line in fh if line.strip()]

    rows = []
    with torch.no_grad():
        for start in range(0, len(texts), args.batch_size):
            batch = tokenizer(
                texts[start : start + args.batch_size],
                padding=True,
                truncation=True,
                max_length=512,
                return_tensors="pt",
            )
            hidden = model(**batch).last_hidden_state
            if args.pooling == "first_token":
                pooled = hidden[:, 0, :]
            else:
                mask = batch["attention_mask"].unsqueeze(-1).to(hidden.dtype)
                pooled = (hidden * mask).sum(1) / mask.sum(1).clamp(min=1.0)
            rows.append(pooled.double().cpu().numpy())

    matrix = np.concatenate(rows, axis=0) if rows else np.zeros((0, 768))
    if matrix.shape[1] != 768:
        print(f"{args.model} produces {matrix.shape[1]}-dim states, expected 768", file=sys.stderr)
        return 1
    matrix.astype("<f8").tofile(args.output)
    with open(args.output + ".json", "w", encoding="utf-8") as fh:
        json.dump(
            {"encoder_id": args.encoder_id, "pooling": args.pooling, "count": int(matrix.shape[0]), "dim": 768},
            fh,
            indent=2,
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
