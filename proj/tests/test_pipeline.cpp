#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

#include <json.hpp>

#include "ironia/config.hpp"
#include "ironia/phase.hpp"
#include "ironia/report.hpp"
#include "support.hpp"

using namespace ironia;
namespace it = ironia::testing;

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

const std::string kFixtures = IRONIA_FIXTURE_DIR;

std::vector<std::string> categories(const RenderedReport& r) {
  std::vector<std::string> out;
  for (const auto& row : parse_report_csv(r.csv)) out.push_back(row.category);
  return out;
}

RunConfig bert_config(const it::TempDir& dir, Mode mode = Mode::Multiclass) {
  RunConfig c;
  c.phase = Phase::BaselineBert;
  c.mode = mode;
  c.primary_path = kFixtures + "/tiny_primary.jsonl";
  c.output_dir = dir.file("out");
  c.training.max_epochs = 30;
  c.training.patience = 10;
  c.training.mode = mode;
  return c;
}

}  // namespace

TEST(EmitReport, RowLabels) {
  ConfusionMatrix b(2);
  b.at(0, 0) = 3;
  b.at(1, 1) = 2;
  b.at(1, 0) = 1;
  const auto bin = emit_report({{"bert", metrics_from_confusion(b, Averaging::Macro)}});
  EXPECT_EQ(categories(bin), (std::vector<std::string>{"IRONY", "NOT IRONY", "AVG"}));

  ConfusionMatrix m(4);
  for (std::size_t i = 0; i < 4; ++i) m.at(i, (i + 1) % 4) = i + 1;
  m.at(2, 2) = 4;
  const auto multi = emit_report({{"bert", metrics_from_confusion(m, Averaging::Weighted)}});
  EXPECT_EQ(categories(multi), (std::vector<std::string>{"IRONY", "NEGATIVE", "NEUTRAL", "POSITIVE", "W. AVG"}));
  EXPECT_NE(multi.markdown.find("| bert | W. AVG |"), std::string::npos);
  EXPECT_NE(multi.markdown.find("| F1 Score | Accuracy |"), std::string::npos);
  EXPECT_EQ(code_of([] { emit_report({}); }), ErrorCode::EmptyReport);
}

TEST(EmitReport, CsvIsLossless) {
  std::mt19937_64 rng(31);
  std::vector<ModelReport> reports;
  for (int i = 0; i < 6; ++i) {
    const std::size_t k = i % 2 ? 4 : 2;
    const auto c = it::random_confusion(rng, k, 997);
    reports.push_back({"model,\"" + std::to_string(i) + "\"", metrics_from_confusion(c, default_averaging(k == 4 ? Mode::Multiclass : Mode::Binary))});
  }
  const auto rendered = emit_report(reports);
  const auto rows = parse_report_csv(rendered.csv);
  std::size_t n = 0;
  for (const auto& m : reports) {
    for (const auto& want : report_rows(m)) {
      const auto& got = rows[n++];
      EXPECT_EQ(got.model, want.model);
      EXPECT_EQ(got.category, want.category);
      EXPECT_EQ(got.precision, want.precision);
      EXPECT_EQ(got.recall, want.recall);
      EXPECT_EQ(got.f1, want.f1);
      EXPECT_EQ(got.accuracy, want.accuracy);
    }
  }
  EXPECT_EQ(n, rows.size());
  EXPECT_EQ(rendered.csv.substr(0, kReportCsvHeader.size()), kReportCsvHeader);
}

TEST(Config, ValidFixture) {
  const auto c = validate_config(kFixtures + "/tiny_bert.toml");
  EXPECT_EQ(c.phase, Phase::BaselineBert);
  EXPECT_EQ(c.mode, Mode::Multiclass);
  EXPECT_EQ(c.encoders, std::vector<std::string>{"stub"});
  EXPECT_EQ(c.primary_path, kFixtures + "/tiny_primary.jsonl");
  EXPECT_EQ(c.training.max_epochs, 40);
  EXPECT_EQ(c.training.patience, 10);
}

TEST(Config, AllViolationsReported) {
  const std::string text = R"(
[run]
phase = "augmented"
encoders = ["stub", "bert-base-uncased", "bert-base-multilingual-uncased", "roberta"]
[training]
max_epochs = 2000
patience = "inf"
colour = "blue"
)";
  try {
    parse_config(text);
    FAIL() << "expected ConfigValidationError";
  } catch (const ConfigValidationError& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    const std::string all = e.what();
    EXPECT_NE(all.find("unknown encoder 'roberta'"), std::string::npos);
    EXPECT_NE(all.find("at most 3 encoders"), std::string::npos);
    EXPECT_NE(all.find("max_epochs"), std::string::npos);
    EXPECT_NE(all.find("training.colour"), std::string::npos);
    EXPECT_NE(all.find("no dataset path"), std::string::npos);
    EXPECT_GE(e.violations().size(), 5u);
  }
}

TEST(Config, ParseDetails) {
  EXPECT_EQ(code_of([] { parse_config("[run]\nphase = \"baseline_llama\"\n[data]\nprimary = \"x\"\n"); }),
            ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config("[run]\nphase = \"baseline_bert\"\nphase = \"enhanced\"\n"); }),
            ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config("[run\n"); }), ErrorCode::ConfigError);
  const auto c = parse_config(
      "[run]\nmode = \"binary\" # comment\npooling = \"mean\"\nparallel = true\n"
      "[data]\nprimary = \"d/p.jsonl\"\nsplit = [0.8, 0.1, 0.1]\n"
      "[training]\npatience = \"inf\"\nlearning_rate = 5e-4\n",
      "/base");
  EXPECT_EQ(c.mode, Mode::Binary);
  EXPECT_EQ(c.training.mode, Mode::Binary);
  EXPECT_EQ(c.pooling, Pooling::Mean);
  EXPECT_TRUE(c.parallel);
  EXPECT_EQ(c.primary_path, "/base/d/p.jsonl");
  EXPECT_EQ(c.split.train, 0.8);
  EXPECT_EQ(c.training.patience, kUnlimitedPatience);
  EXPECT_EQ(c.training.learning_rate, 5e-4);
  EXPECT_EQ(code_of([] { validate_config("/nonexistent.toml"); }), ErrorCode::ConfigError);
}

TEST(RunPhase, BaselineGptScoresMachineTags) {
  it::TempDir dir;
  auto c = validate_config(kFixtures + "/tiny_gpt.toml");
  c.mode = Mode::Multiclass;
  c.output_dir = dir.file("out");
  const auto out = run_phase(c);
  ASSERT_EQ(out.reports.size(), 1u);
  EXPECT_EQ(out.reports[0].model, "llm:mock");

  // Hand tally of the fixture responses over the same held-out entries.
  const auto ds = load_dataset(c.primary_path, DataFormat::Jsonl);
  const auto parts = split(ds, c.split, c.split_seed);
  std::map<std::string, Label> machine;
  for (const auto& line : detail::split_lines(detail::read_file(c.llm.fixture))) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    machine[j["key"]] = parse_classification_response(j["response"].get<std::string>()).tag;
  }
  ConfusionMatrix want(4);
  for (const auto& e : parts.test.entries) want.add(encode(*e.label, Mode::Multiclass), encode(machine[e.id], Mode::Multiclass));
  EXPECT_EQ(out.reports[0].report.confusion, want);
  EXPECT_EQ(out.reports[0].report.total, parts.test.size());
  EXPECT_TRUE(std::filesystem::exists(dir.file("out/baseline_gpt__multiclass__report.csv")));
}

TEST(RunPhase, BaselineGptBinary) {
  it::TempDir dir;
  auto c = validate_config(kFixtures + "/tiny_gpt.toml");
  c.output_dir = dir.file("out");
  const auto out = run_phase(c);
  EXPECT_EQ(out.reports[0].report.mode, Mode::Binary);
  EXPECT_EQ(out.reports[0].report.averaging, Averaging::Macro);
}

TEST(RunPhase, BaselineBertIsDeterministic) {
  it::TempDir a, b;
  const auto ra = run_phase(bert_config(a));
  const auto rb = run_phase(bert_config(b));
  const auto csv_a = detail::read_file(a.file("out/baseline_bert__multiclass__report.csv"));
  const auto csv_b = detail::read_file(b.file("out/baseline_bert__multiclass__report.csv"));
  EXPECT_EQ(csv_a, csv_b);
  EXPECT_EQ(csv_a, detail::read_file(IRONIA_GOLDEN_DIR "/baseline_bert_report.csv"));
  for (const char* f : {"baseline_bert__stub__multiclass.json", "baseline_bert__stub__multiclass.md",
                        "baseline_bert__stub__multiclass.history.json", "baseline_bert__stub__multiclass.ckpt"}) {
    EXPECT_TRUE(std::filesystem::exists(a.file(std::string("out/") + f))) << f;
  }
  const auto [head, meta] = load_checkpoint(a.file("out/baseline_bert__stub__multiclass.ckpt"));
  EXPECT_EQ(meta.encoder_id, "stub");
}

TEST(RunPhase, BinaryAndParallelEncoders) {
  it::TempDir dir;
  auto c = bert_config(dir, Mode::Binary);
  c.training.max_epochs = 5;
  c.parallel = true;
  EncoderRegistry reg = EncoderRegistry::with_defaults();
  reg.add("stub-copy", "builtin:stub");
  // Only the exact "stub" id maps to the builtin; a second id exercises the
  // parallel path through a failing external command.
  EncoderOptions opts;
  opts.embed_command = "false";
  c.encoders = {"stub", "stub-copy"};
  EXPECT_EQ(code_of([&] { run_phase(c, make_mock_client, EncoderBridge(reg, opts)); }), ErrorCode::EncoderLoadError);

  c.encoders = {"stub"};
  const auto out = run_phase(c);
  ASSERT_EQ(out.reports.size(), 1u);
  const auto rows = report_rows(out.reports[0]);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2].category, "AVG");
}

TEST(RunPhase, Errors) {
  it::TempDir dir;
  auto c = bert_config(dir);
  c.phase = Phase::Augmented;
  c.augmented_path = c.primary_path;
  c.encoders = {"stub", "bert-base-uncased", "bert-base-multilingual-uncased", "beto-cased-finetuned-xix-latam"};
  EXPECT_EQ(code_of([&] { run_phase(c); }), ErrorCode::ConfigError);

  auto missing = bert_config(dir);
  missing.primary_path = dir.file("nope.jsonl");
  EXPECT_EQ(code_of([&] { run_phase(missing); }), ErrorCode::FileError);

  auto remote = validate_config(kFixtures + "/tiny_gpt.toml");
  remote.llm.client = ClientKind::Remote;
  remote.llm.api_key_env = "IRONIA_TEST_NO_SUCH_KEY";
  remote.output_dir = dir.file("out");
  ::unsetenv("IRONIA_TEST_NO_SUCH_KEY");
  EXPECT_EQ(code_of([&] { run_phase(remote); }), ErrorCode::ConfigError);
}
