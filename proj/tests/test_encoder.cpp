#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <json.hpp>

#include "ironia/detail/random.hpp"
#include "ironia/encoder.hpp"
#include "support.hpp"

using namespace ironia;
using ironia::testing::TempDir;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an ironia::Error";
  return ErrorCode::ContractViolation;
}

double norm(const Embedding& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Stand-in for the transformer runner: row r is filled with r + 0.5, and the
// pooling name is recorded in the sidecar.
const char* kFakeEmbedder = R"PY(
import argparse, json, struct
p = argparse.ArgumentParser()
for a in ("--model", "--encoder-id", "--pooling", "--input", "--output"):
    p.add_argument(a)
a = p.parse_args()
rows = [json.loads(l) for l in open(a.input, encoding="utf-8") if l.strip()]
with open(a.output, "wb") as f:
    for r, _ in enumerate(rows):
        f.write(struct.pack("<768d", *([r + 0.5] * 768)))
json.dump({"encoder_id": a.encoder_id, "pooling": a.pooling, "count": len(rows), "dim": 768},
          open(a.output + ".json", "w"))
)PY";

}  // namespace

TEST(StubEncoder, GoldenValues) {
  const auto golden = nlohmann::json::parse(detail::read_file(IRONIA_GOLDEN_DIR "/stub_embed.json"));
  for (const auto& [text, rec] : golden.items()) {
    EXPECT_EQ(detail::hex64(detail::fnv1a64(text)), rec["key"].get<std::string>());
    const auto v = stub_embed(text);
    const auto& first = rec["first"];
    for (std::size_t i = 0; i < first.size(); ++i) {
      EXPECT_NEAR(v[i], std::strtod(first[i].get<std::string>().c_str(), nullptr), 1e-15) << text << " " << i;
    }
    EXPECT_NEAR(v[767], std::strtod(rec["last"].get<std::string>().c_str(), nullptr), 1e-15);
  }
}

TEST(StubEncoder, UnitNormAndNormalization) {
  const auto a = stub_embed("a");
  EXPECT_EQ(a.size(), 768u);
  EXPECT_NEAR(norm(a), 1.0, 1e-12);
  EXPECT_EQ(stub_embed("a "), a);
  EXPECT_EQ(stub_embed("  Ven,\tdijimos \n con entusiasmo"), stub_embed("Ven, dijimos con entusiasmo"));
  EXPECT_NE(stub_embed("A"), a);
  EXPECT_EQ(code_of([] { stub_embed(" \n "); }), ErrorCode::EmptyText);
}

TEST(EncoderBridge, StubIsDeterministicAndOrderPreserving) {
  EncoderBridge bridge;
  std::vector<std::string> texts;
  for (int i = 0; i < 100; ++i) texts.push_back("texto distinto " + std::to_string(i));
  const auto v = bridge.embed(texts, "stub");
  ASSERT_EQ(v.size(), 100u);
  std::set<Embedding> unique(v.begin(), v.end());
  EXPECT_EQ(unique.size(), 100u);
  for (int i = 0; i < 100; i += 17) EXPECT_EQ(v[i], stub_embed(texts[i]));
  EXPECT_EQ(bridge.embed(texts, "stub"), v);
  EXPECT_EQ(bridge.embed({"x"}, "stub", Pooling::Mean)[0], stub_embed("x"));
}

TEST(EncoderBridge, Errors) {
  EncoderBridge bridge;
  EXPECT_EQ(code_of([&] { bridge.embed({"x"}, "roberta"); }), ErrorCode::UnknownEncoder);
  EXPECT_EQ(code_of([&] { bridge.embed({"x", ""}, "stub"); }), ErrorCode::EmptyText);

  EncoderOptions broken;
  broken.embed_command = "false";
  EncoderBridge unavailable(EncoderRegistry::with_defaults(), broken);
  EXPECT_EQ(code_of([&] { unavailable.embed({"x"}, "bert-base-uncased"); }), ErrorCode::EncoderLoadError);
}

TEST(EncoderBridge, ExternalCommand) {
  TempDir dir;
  detail::write_file(dir.file("fake_embed.py"), kFakeEmbedder);
  EncoderOptions opts;
  opts.embed_command = "python3 " + detail::shell_quote(dir.file("fake_embed.py"));
  opts.cache_dir = "";
  EncoderBridge bridge(EncoderRegistry::with_defaults(), opts);
  const auto v = bridge.embed({"uno", "dos 'con' comillas", "tres"}, "dccuchile/bert-base-spanish-wwm-cased",
                              Pooling::Mean);
  ASSERT_EQ(v.size(), 3u);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(v[r][0], r + 0.5);
    EXPECT_EQ(v[r][767], r + 0.5);
  }
}

TEST(EncoderRegistry, DefaultIds) {
  const auto r = EncoderRegistry::with_defaults();
  for (const char* id : {"bert-base-uncased", "bert-base-multilingual-uncased",
                         "dccuchile/bert-base-spanish-wwm-uncased", "dccuchile/bert-base-spanish-wwm-cased",
                         "beto-cased-finetuned-xix-latam", "stub"}) {
    EXPECT_TRUE(r.contains(id)) << id;
  }
  EXPECT_EQ(r.ids().size(), 6u);
  EXPECT_EQ(code_of([&] { r.checkpoint("nope"); }), ErrorCode::UnknownEncoder);
}

TEST(EmbeddingFiles, RoundTrip) {
  TempDir dir;
  std::vector<Embedding> rows = {stub_embed("a"), stub_embed("b")};
  rows[1][5] = -0.0;
  rows[1][6] = 1e-310;
  save_embeddings(dir.file("m.bin"), rows, {"stub", Pooling::Mean, 2});
  const auto [back, meta] = load_embeddings(dir.file("m.bin"));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t i = 0; i < kEmbeddingDim; ++i)
      EXPECT_EQ(std::bit_cast<std::uint64_t>(back[r][i]), std::bit_cast<std::uint64_t>(rows[r][i]));
  EXPECT_EQ(meta.encoder_id, "stub");
  EXPECT_EQ(meta.pooling, Pooling::Mean);
  EXPECT_EQ(std::filesystem::file_size(dir.file("m.bin")), 2u * 768u * 8u);

  detail::write_file(dir.file("m.bin.json"),
                     R"({"encoder_id":"stub","pooling":"mean","count":2,"dim":512})");
  EXPECT_EQ(code_of([&] { load_embeddings(dir.file("m.bin")); }), ErrorCode::DimError);
}
