// ironia: command-line driver for corpus work, annotation, review and the
// experiment phases.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 backend error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ironia/ironia.hpp"
#include "ironia/remote_client.hpp"
#include "ironia/review_http.hpp"

using namespace ironia;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitBackend = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownEncoder: return kExitConfig;
    case ErrorCode::BackendError:
    case ErrorCode::EncoderLoadError: return kExitBackend;
    default: return kExitData;
  }
}

// Client selection shared by annotate and enhance.
struct ClientOptions {
  std::string client = "mock";
  std::string fixture;
  bool identity = false;
  RemoteClientConfig remote;
  std::string language = "es";
  int retries = 2;
  int max_in_flight = 4;

  void attach(CLI::App* cmd) {
    cmd->add_option("--client", client, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
    cmd->add_option("--fixture", fixture, "mock responses (JSONL of key/response)");
    cmd->add_flag("--identity", identity, "mock client echoes the input text");
    cmd->add_option("--base-url", remote.base_url, "chat-completions endpoint prefix");
    cmd->add_option("--model", remote.model, "remote model name");
    cmd->add_option("--api-key-env", remote.api_key_env, "variable holding the API key");
    cmd->add_option("--language", language, "prompt language")->check(CLI::IsMember({"es", "en"}));
    cmd->add_option("--retries", retries, "retries on transport errors")->check(CLI::NonNegativeNumber);
    cmd->add_option("--max-in-flight", max_in_flight, "concurrent requests")->check(CLI::PositiveNumber);
  }

  std::unique_ptr<LlmClient> make() const {
    if (client == "remote") return std::make_unique<RemoteClient>(remote);
    if (identity) return std::make_unique<MockClient>(MockClient::identity());
    if (fixture.empty()) throw Error(ErrorCode::ConfigError, "mock client needs --fixture or --identity");
    return std::make_unique<MockClient>(MockClient::from_jsonl(fixture));
  }

  BatchPolicy policy() const {
    BatchPolicy p;
    p.retries = retries;
    p.max_in_flight = max_in_flight;
    p.language = parse_language(language);
    return p;
  }
};

std::unique_ptr<LlmClient> client_from_settings(const LlmSettings& s) {
  if (s.client == ClientKind::Mock) return make_mock_client(s);
  RemoteClientConfig rc;
  rc.base_url = s.base_url;
  rc.model = s.model;
  rc.api_key_env = s.api_key_env;
  return std::make_unique<RemoteClient>(rc);
}

Dataset load(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::FileError, "not found: " + path);
  return load_dataset(path, format_from_path(path));
}

void write_failures(const std::string& path, const std::vector<BatchFailure>& failures) {
  if (failures.empty()) return;
  std::string lines;
  for (const auto& f : failures) {
    lines += nlohmann::json({{"entry_id", f.entry_id}, {"error", std::string(to_string(f.code))},
                             {"message", f.message}})
                 .dump() +
             "\n";
  }
  detail::write_file(path, lines);
  std::cerr << failures.size() << " failures written to " << path << "\n";
}

nlohmann::json distribution_json(const Dataset& ds) {
  const auto d = class_distribution(ds);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : d.rows) {
    rows.push_back({{"label", std::string(display_name(r.label))}, {"count", r.count},
                    {"percent", r.percent_2dp(d.total)}});
  }
  return {{"dataset", ds.name}, {"mode", std::string(to_string(d.mode))}, {"total", d.total}, {"rows", rows}};
}

// Splits the four-class data first so every command sees the same parts.
Splits split_for(const Dataset& ds, Mode mode, std::uint64_t seed) {
  Splits parts = split(ds, SplitRatios{}, seed);
  if (mode == Mode::Binary) {
    parts.train = to_binary(parts.train);
    parts.validation = to_binary(parts.validation);
    parts.test = to_binary(parts.test);
  }
  return parts;
}

std::vector<Example> embed_examples(const Dataset& ds, const EncoderBridge& bridge, const std::string& encoder,
                                    Pooling pooling) {
  return to_examples(ds, bridge.embed(texts_of(ds), encoder, pooling));
}

// Transformer encoders run through the bundled script unless the
// environment names another command.
EncoderBridge make_bridge() {
  EncoderOptions opts;
  if (std::getenv("IRONIA_EMBED_CMD") == nullptr) {
    opts.embed_command = "python3 " + detail::shell_quote(IRONIA_TOOLS_DIR "/hf_embed.py");
  }
  return EncoderBridge(EncoderRegistry::with_defaults(), opts);
}

std::sig_atomic_t volatile g_stop = 0;
httplib::Server* g_server = nullptr;

void on_signal(int) {
  g_stop = 1;
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Irony detection workbench"};
  app.require_subcommand(1);

  // annotate
  std::string ann_input, ann_output, ann_queue, ann_failures;
  ClientOptions ann_client;
  auto* annotate = app.add_subcommand("annotate", "Tag entries with the classification prompt");
  annotate->add_option("--input", ann_input, "dataset (JSONL or CSV)")->required();
  annotate->add_option("--output", ann_output, "annotations JSONL")->required();
  annotate->add_option("--queue", ann_queue, "also enqueue results into this review log");
  annotate->add_option("--failures", ann_failures, "failure report JSONL");
  ann_client.attach(annotate);

  // enhance
  std::string enh_input, enh_output, enh_failures;
  ClientOptions enh_client;
  auto* enhance = app.add_subcommand("enhance", "Rewrite entries with the enhancement prompt");
  enhance->add_option("--input", enh_input, "labeled dataset")->required();
  enhance->add_option("--output", enh_output, "enhanced dataset JSONL")->required();
  enhance->add_option("--failures", enh_failures, "failure report JSONL");
  enh_client.attach(enhance);

  // review-serve
  std::string srv_queue, srv_host = "127.0.0.1";
  int srv_port = 8080;
  int lease_minutes = 30;
  auto* serve = app.add_subcommand("review-serve", "Serve the review API over HTTP");
  serve->add_option("--queue", srv_queue, "review event log")->required();
  serve->add_option("--host", srv_host, "bind address");
  serve->add_option("--port", srv_port, "bind port")->check(CLI::Range(1, 65535));
  serve->add_option("--lease-minutes", lease_minutes, "assignment lease")->check(CLI::PositiveNumber);

  // review-export
  std::string exp_queue, exp_output, exp_primary, exp_merged, exp_agreement;
  auto* review_export = app.add_subcommand("review-export", "Export verified entries from a finished queue");
  review_export->add_option("--queue", exp_queue, "review event log")->required();
  review_export->add_option("--output", exp_output, "verified entries JSONL")->required();
  review_export->add_option("--primary", exp_primary, "primary dataset to merge with");
  review_export->add_option("--merged", exp_merged, "augmented dataset JSONL")->needs("--primary");
  review_export->add_option("--agreement", exp_agreement, "agreement report JSON");

  // train
  std::string tr_data, tr_encoder = "stub", tr_mode = "multiclass", tr_output, tr_history, tr_pooling = "first_token";
  TrainingConfig tr_cfg;
  std::uint64_t tr_split_seed = kDefaultSplitSeed;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier head on one encoder");
  train_cmd->add_option("--data", tr_data, "labeled four-class dataset")->required();
  train_cmd->add_option("--encoder", tr_encoder, "encoder id");
  train_cmd->add_option("--mode", tr_mode, "multiclass or binary")->check(CLI::IsMember({"multiclass", "binary"}));
  train_cmd->add_option("--pooling", tr_pooling, "first_token or mean")->check(CLI::IsMember({"first_token", "mean"}));
  train_cmd->add_option("--max-epochs", tr_cfg.max_epochs, "epoch cap");
  train_cmd->add_option("--patience", tr_cfg.patience, "early stopping patience");
  train_cmd->add_option("--divergence-gap", tr_cfg.divergence_gap, "validation minus train loss threshold");
  train_cmd->add_option("--seed", tr_cfg.seed, "initialization and shuffling seed");
  train_cmd->add_option("--split-seed", tr_split_seed, "split seed");
  train_cmd->add_option("--output", tr_output, "checkpoint path")->required();
  train_cmd->add_option("--history", tr_history, "loss history JSON");

  // evaluate
  std::string ev_data, ev_checkpoint, ev_output, ev_part = "test";
  std::uint64_t ev_split_seed = kDefaultSplitSeed;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a held-out split");
  evaluate_cmd->add_option("--data", ev_data, "labeled four-class dataset")->required();
  evaluate_cmd->add_option("--checkpoint", ev_checkpoint, "checkpoint from train")->required();
  evaluate_cmd->add_option("--part", ev_part, "test, validation or all")
      ->check(CLI::IsMember({"test", "validation", "all"}));
  evaluate_cmd->add_option("--split-seed", ev_split_seed, "split seed");
  evaluate_cmd->add_option("--output", ev_output, "report JSON");

  // phase
  std::string ph_config;
  bool ph_parallel = false;
  auto* phase = app.add_subcommand("phase", "Run one experiment phase from a config file");
  phase->add_option("--config", ph_config, "run config")->required();
  phase->add_flag("--parallel", ph_parallel, "run encoders concurrently");

  // report
  std::vector<std::string> rep_inputs;
  std::string rep_markdown, rep_csv;
  auto* report = app.add_subcommand("report", "Combine report JSON files into one table");
  report->add_option("inputs", rep_inputs, "report JSON files")->required();
  report->add_option("--markdown", rep_markdown, "markdown output (default stdout)");
  report->add_option("--csv", rep_csv, "CSV output");

  // stats
  std::string st_data, st_mode = "multiclass", st_queue;
  auto* stats = app.add_subcommand("stats", "Class distribution of a dataset or agreement of a queue");
  stats->add_option("--data", st_data, "dataset");
  stats->add_option("--mode", st_mode, "multiclass or binary")->check(CLI::IsMember({"multiclass", "binary"}));
  stats->add_option("--queue", st_queue, "review event log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*annotate) {
      const Dataset ds = load(ann_input);
      auto client = ann_client.make();
      const auto batch = annotate_batch(ds.entries, *client, ann_client.policy());
      std::string lines;
      for (const auto& a : batch.annotations) lines += to_json(a).dump() + "\n";
      detail::write_file(ann_output, lines);
      write_failures(ann_failures.empty() ? ann_output + ".failures.jsonl" : ann_failures, batch.failures);
      if (!ann_queue.empty()) {
        std::unordered_map<std::string, const Entry*> by_id;
        for (const auto& e : ds.entries) by_id[e.id] = &e;
        std::vector<AnnotatedEntry> items;
        for (const auto& a : batch.annotations) {
          Entry e = *by_id.at(a.entry_id);
          e.label.reset();
          e.category_encoded.reset();
          e.provenance = Provenance::Machine;
          items.push_back({std::move(e), a});
        }
        auto queue = ReviewQueue::open(ann_queue);
        std::cout << "enqueued " << queue->enqueue(items) << " items\n";
      }
      std::cout << batch.annotations.size() << " annotated, " << batch.failures.size() << " failed\n";
      if (batch.annotations.empty()) return kExitBackend;
    } else if (*enhance) {
      const Dataset ds = load(enh_input);
      auto client = enh_client.make();
      const auto batch = enhance_batch(ds.entries, *client, enh_client.policy());
      save_jsonl(apply_enhancements(ds, batch.outputs), enh_output);
      write_failures(enh_failures.empty() ? enh_output + ".failures.jsonl" : enh_failures, batch.failures);
      std::cout << batch.outputs.size() << " enhanced, " << batch.failures.size() << " failed\n";
      if (batch.outputs.empty()) return kExitBackend;
    } else if (*serve) {
      ReviewOptions opts;
      opts.lease = std::chrono::minutes(lease_minutes);
      auto queue = ReviewQueue::open(srv_queue, opts);
      httplib::Server server;
      mount_review_api(server, *queue);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "review API on http://" << srv_host << ":" << srv_port << "\n" << std::flush;
      if (!server.listen(srv_host, srv_port) && !g_stop) {
        throw Error(ErrorCode::ConfigError, "cannot bind " + srv_host + ":" + std::to_string(srv_port));
      }
    } else if (*review_export) {
      if (!std::filesystem::exists(exp_queue)) throw Error(ErrorCode::FileError, "not found: " + exp_queue);
      auto queue = ReviewQueue::open(exp_queue);
      const auto verified = queue->export_verified();
      Dataset out{"verified", Mode::Multiclass, verified};
      save_jsonl(out, exp_output);
      if (!exp_agreement.empty()) detail::write_file(exp_agreement, to_json(queue->agreement_report()).dump(2) + "\n");
      std::cout << verified.size() << " verified entries\n";
      if (!exp_primary.empty()) {
        Dataset merged = merge_augmented(load(exp_primary), verified);
        if (!exp_merged.empty()) save_jsonl(merged, exp_merged);
        std::cout << distribution_json(merged).dump(2) << "\n";
      }
    } else if (*train_cmd) {
      const Mode mode = parse_mode(tr_mode);
      const Pooling pooling = parse_pooling(tr_pooling);
      tr_cfg.mode = mode;
      tr_cfg.validate();
      const EncoderBridge bridge = make_bridge();
      bridge.registry().checkpoint(tr_encoder);
      const Splits parts = split_for(load(tr_data), mode, tr_split_seed);
      const auto train_set = embed_examples(parts.train, bridge, tr_encoder, pooling);
      const auto val_set = embed_examples(parts.validation, bridge, tr_encoder, pooling);
      auto [head, history] =
          train(init_head(static_cast<std::size_t>(class_count(mode)), tr_cfg.seed), train_set, val_set, tr_cfg);
      save_checkpoint(tr_output, head, {mode, tr_encoder, pooling, tr_cfg.seed});
      if (!tr_history.empty()) {
        nlohmann::json hist = {{"stop_reason", std::string(to_string(history.stop_reason))},
                               {"best_epoch", history.best_epoch},
                               {"epochs", nlohmann::json::array()}};
        for (const auto& e : history.epochs) hist["epochs"].push_back({e.train, e.validation});
        detail::write_file(tr_history, hist.dump(2) + "\n");
      }
      std::cout << history.epochs.size() << " epochs (" << to_string(history.stop_reason) << "), best epoch "
                << history.best_epoch << "\n";
    } else if (*evaluate_cmd) {
      const auto [head, meta] = load_checkpoint(ev_checkpoint);
      const EncoderBridge bridge = make_bridge();
      const Dataset ds = load(ev_data);
      Dataset part;
      if (ev_part == "all") {
        part = meta.mode == Mode::Binary ? to_binary(ds) : ds;
      } else {
        Splits parts = split_for(ds, meta.mode, ev_split_seed);
        part = ev_part == "test" ? parts.test : parts.validation;
      }
      const auto report_json = [&] {
        auto j = to_json(evaluate(head, embed_examples(part, bridge, meta.encoder_id, meta.pooling)));
        j["model"] = meta.encoder_id;
        return j;
      }();
      if (!ev_output.empty()) detail::write_file(ev_output, report_json.dump(2) + "\n");
      std::cout << emit_report({{meta.encoder_id, eval_report_from_json(report_json)}}).markdown;
    } else if (*phase) {
      RunConfig cfg = validate_config(ph_config);
      cfg.parallel = cfg.parallel || ph_parallel;
      const auto out = run_phase(cfg, client_from_settings, make_bridge());
      for (const auto& f : out.files) std::cout << f << "\n";
    } else if (*report) {
      std::vector<ModelReport> reports;
      for (const auto& path : rep_inputs) {
        auto j = nlohmann::json::parse(detail::read_file(path), nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::ParseError, "not JSON: " + path);
        const std::string model = j.value("model", std::filesystem::path(path).stem().string());
        reports.push_back({model, eval_report_from_json(j)});
      }
      const auto rendered = emit_report(reports);
      if (!rep_csv.empty()) detail::write_file(rep_csv, rendered.csv);
      if (rep_markdown.empty()) {
        std::cout << rendered.markdown;
      } else {
        detail::write_file(rep_markdown, rendered.markdown);
      }
    } else if (*stats) {
      if (st_data.empty() == st_queue.empty()) throw Error(ErrorCode::ConfigError, "give exactly one of --data, --queue");
      if (!st_data.empty()) {
        Dataset ds = load(st_data);
        if (parse_mode(st_mode) == Mode::Binary) ds = to_binary(ds);
        std::cout << distribution_json(ds).dump(2) << "\n";
      } else {
        if (!std::filesystem::exists(st_queue)) throw Error(ErrorCode::FileError, "not found: " + st_queue);
        auto queue = ReviewQueue::open(st_queue);
        std::cout << review_stats(*queue).dump(2) << "\n";
      }
    }
  } catch (const ConfigValidationError& e) {
    for (const auto& v : e.violations()) std::cerr << "config: " << v << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
