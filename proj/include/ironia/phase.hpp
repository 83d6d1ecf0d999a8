#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ironia/config.hpp"
#include "ironia/corpus.hpp"
#include "ironia/encoder.hpp"
#include "ironia/head.hpp"
#include "ironia/llm.hpp"
#include "ironia/metrics.hpp"
#include "ironia/report.hpp"
#include "ironia/train.hpp"

namespace ironia {

using ClientFactory = std::function<std::unique_ptr<LlmClient>(const LlmSettings&)>;

/// Builds the mock client; remote clients need a factory from the caller.
inline std::unique_ptr<LlmClient> make_mock_client(const LlmSettings& s) {
  if (s.client != ClientKind::Mock) {
    throw Error(ErrorCode::ConfigError, "remote client is not available in this build context");
  }
  return std::make_unique<MockClient>(MockClient::from_jsonl(s.fixture));
}

struct PhaseOutputs {
  std::vector<ModelReport> reports;
  std::vector<std::string> files;
};

inline std::string file_stem(std::string s) {
  for (auto pos = s.find('/'); pos != std::string::npos; pos = s.find('/')) s.replace(pos, 1, "__");
  return s;
}

inline std::vector<Example> to_examples(const Dataset& ds, const std::vector<Embedding>& vectors) {
  std::vector<Example> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& e = ds.entries[i];
    if (!e.label) throw Error(ErrorCode::MissingLabel, "entry '" + e.id + "'");
    out.push_back({vectors[i], encode(*e.label, ds.mode)});
  }
  return out;
}

inline std::vector<std::string> texts_of(const Dataset& ds) {
  std::vector<std::string> t;
  t.reserve(ds.size());
  for (const auto& e : ds.entries) t.push_back(e.text);
  return t;
}

struct EncoderRun {
  ModelReport report;
  TrainingHistory history;
  HeadParams head;
};

inline EncoderRun run_encoder(const RunConfig& cfg, const Splits& parts, const std::string& encoder_id,
                              const EncoderBridge& bridge) {
  auto embed = [&](const Dataset& ds) {
    return to_examples(ds, bridge.embed(texts_of(ds), encoder_id, cfg.pooling));
  };
  const auto train_set = embed(parts.train);
  const auto val_set = embed(parts.validation);
  const auto test_set = embed(parts.test);
  TrainingConfig tc = cfg.training;
  tc.mode = cfg.mode;
  auto [head, history] =
      train(init_head(static_cast<std::size_t>(class_count(cfg.mode)), tc.seed), train_set, val_set, tc);
  return {{encoder_id, evaluate(head, test_set)}, std::move(history), std::move(head)};
}

/// Runs one experiment phase end to end and writes its report files.
///
/// All phases split the four-class dataset with the same seed before any
/// binary merge, so the LLM baseline and the encoder pipeline are scored on
/// the identical held-out entries.
inline PhaseOutputs run_phase(const RunConfig& cfg, const ClientFactory& make_client = make_mock_client,
                              const EncoderBridge& bridge = EncoderBridge{}) {
  if (auto v = config_violations(cfg, bridge.registry()); !v.empty()) throw ConfigValidationError(std::move(v));
  const std::string& path = cfg.dataset_path();
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::FileError, "dataset not found: " + path);
  if (cfg.phase == Phase::BaselineGpt && cfg.llm.client == ClientKind::Remote) {
    const char* key = std::getenv(cfg.llm.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(ErrorCode::ConfigError, "remote client selected but " + cfg.llm.api_key_env + " is not set");
    }
  }

  const Dataset ds = load_dataset(path, format_from_path(path));
  Splits parts = split(ds, cfg.split, cfg.split_seed);
  if (cfg.mode == Mode::Binary) {
    parts = {to_binary(parts.train), to_binary(parts.validation), to_binary(parts.test)};
  }

  std::filesystem::create_directories(cfg.output_dir);
  const std::filesystem::path out_dir(cfg.output_dir);
  const std::string phase_name(to_string(cfg.phase));
  const std::string mode_name(to_string(cfg.mode));
  PhaseOutputs out;
  auto write = [&](const std::string& name, const std::string& contents) {
    const auto p = (out_dir / name).string();
    detail::write_file(p, contents);
    out.files.push_back(p);
  };

  if (cfg.phase == Phase::BaselineGpt) {
    auto client = make_client(cfg.llm);
    BatchPolicy policy;
    policy.retries = cfg.llm.retries;
    policy.max_in_flight = cfg.llm.max_in_flight;
    policy.language = cfg.llm.language;
    const auto batch = annotate_batch(parts.test.entries, *client, policy);
    std::unordered_map<std::string, Label> predicted;
    for (const auto& a : batch.annotations) predicted[a.entry_id] = a.tag;
    ConfusionMatrix cm(static_cast<std::size_t>(class_count(cfg.mode)));
    for (const auto& e : parts.test.entries) {
      auto it = predicted.find(e.id);
      if (it == predicted.end()) continue;
      const Label tag = cfg.mode == Mode::Binary ? ironia::to_binary(it->second) : it->second;
      cm.add(encode(*e.label, cfg.mode), encode(tag, cfg.mode));
    }
    if (!batch.failures.empty()) {
      std::string lines;
      for (const auto& f : batch.failures) {
        lines += nlohmann::json({{"entry_id", f.entry_id}, {"error", std::string(to_string(f.code))},
                                 {"message", f.message}}).dump() + "\n";
      }
      write(phase_name + "__" + mode_name + "__failures.jsonl", lines);
    }
    out.reports.push_back({"llm:" + client->model_id(), metrics_from_confusion(cm, default_averaging(cfg.mode))});
  } else {
    std::vector<EncoderRun> runs;
    if (cfg.parallel && cfg.encoders.size() > 1) {
      std::vector<std::future<EncoderRun>> futures;
      for (const auto& enc : cfg.encoders) {
        futures.push_back(std::async(std::launch::async, [&, enc] { return run_encoder(cfg, parts, enc, bridge); }));
      }
      for (auto& f : futures) runs.push_back(f.get());
    } else {
      for (const auto& enc : cfg.encoders) runs.push_back(run_encoder(cfg, parts, enc, bridge));
    }
    for (auto& run : runs) {
      const std::string stem = phase_name + "__" + file_stem(run.report.model) + "__" + mode_name;
      nlohmann::json hist = {{"stop_reason", std::string(to_string(run.history.stop_reason))},
                             {"best_epoch", run.history.best_epoch},
                             {"epochs", nlohmann::json::array()}};
      for (const auto& e : run.history.epochs) hist["epochs"].push_back({e.train, e.validation});
      write(stem + ".history.json", hist.dump(2) + "\n");
      const auto ckpt = (out_dir / (stem + ".ckpt")).string();
      save_checkpoint(ckpt, run.head, {cfg.mode, run.report.model, cfg.pooling, cfg.training.seed});
      out.files.push_back(ckpt);
      out.reports.push_back(std::move(run.report));
    }
  }

  for (const auto& r : out.reports) {
    const std::string stem = phase_name + "__" + file_stem(r.model) + "__" + mode_name;
    auto j = to_json(r.report);
    j["model"] = r.model;
    write(stem + ".json", j.dump(2) + "\n");
    write(stem + ".md", emit_report({r}).markdown);
  }
  const auto combined = emit_report(out.reports);
  write(phase_name + "__" + mode_name + "__report.md", combined.markdown);
  write(phase_name + "__" + mode_name + "__report.csv", combined.csv);
  return out;
}

}  // namespace ironia
