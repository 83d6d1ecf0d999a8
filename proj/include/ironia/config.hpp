#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "ironia/corpus.hpp"
#include "ironia/detail/keyvalue.hpp"
#include "ironia/encoder.hpp"
#include "ironia/error.hpp"
#include "ironia/prompts.hpp"
#include "ironia/train.hpp"

namespace ironia {

enum class Phase { BaselineGpt, BaselineBert, Enhanced, Augmented };

constexpr std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::BaselineGpt: return "baseline_gpt";
    case Phase::BaselineBert: return "baseline_bert";
    case Phase::Enhanced: return "enhanced";
    case Phase::Augmented: return "augmented";
  }
  return "";
}

inline std::optional<Phase> try_parse_phase(std::string_view s) {
  if (s == "baseline_gpt") return Phase::BaselineGpt;
  if (s == "baseline_bert") return Phase::BaselineBert;
  if (s == "enhanced") return Phase::Enhanced;
  if (s == "augmented") return Phase::Augmented;
  return std::nullopt;
}

enum class ClientKind { Mock, Remote };

struct LlmSettings {
  ClientKind client = ClientKind::Mock;
  std::string fixture;  // mock responses, JSONL {key, response}
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o";
  std::string api_key_env = "OPENAI_API_KEY";
  Language language = Language::Es;
  int retries = 2;
  int max_in_flight = 4;
};

/// Only the augmented phase caps the number of encoders.
inline constexpr std::size_t kAugmentedEncoderLimit = 3;

struct RunConfig {
  Phase phase = Phase::BaselineBert;
  Mode mode = Mode::Multiclass;
  std::string primary_path;
  std::string enhanced_path;
  std::string augmented_path;
  SplitRatios split;
  std::uint64_t split_seed = kDefaultSplitSeed;
  std::vector<std::string> encoders = {"stub"};
  Pooling pooling = Pooling::FirstToken;
  TrainingConfig training;
  std::string output_dir = "out";
  bool parallel = false;
  LlmSettings llm;

  const std::string& dataset_path() const {
    switch (phase) {
      case Phase::Enhanced: return enhanced_path;
      case Phase::Augmented: return augmented_path;
      default: return primary_path;
    }
  }
};

/// ConfigError carrying every violation found, not just the first.
class ConfigValidationError : public Error {
 public:
  explicit ConfigValidationError(std::vector<std::string> violations)
      : Error(ErrorCode::ConfigError, join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
    return out;
  }
  std::vector<std::string> violations_;
};

/// Checks the cross-field constraints of a run config.
inline std::vector<std::string> config_violations(const RunConfig& c,
                                                  const EncoderRegistry& registry = EncoderRegistry::with_defaults()) {
  std::vector<std::string> out;
  if (c.dataset_path().empty()) out.push_back("no dataset path for phase " + std::string(to_string(c.phase)));
  const bool uses_encoders = c.phase != Phase::BaselineGpt;
  if (uses_encoders) {
    if (c.encoders.empty()) out.push_back("run.encoders must list at least one encoder");
    for (const auto& e : c.encoders) {
      if (!registry.contains(e)) out.push_back("unknown encoder '" + e + "'");
    }
    if (c.phase == Phase::Augmented && c.encoders.size() > kAugmentedEncoderLimit) {
      out.push_back("augmented phase takes at most 3 encoders, got " + std::to_string(c.encoders.size()));
    }
  }
  if (c.phase == Phase::BaselineGpt && c.llm.client == ClientKind::Mock && c.llm.fixture.empty()) {
    out.push_back("llm.fixture is required for the mock client");
  }
  try {
    c.training.validate();
  } catch (const Error& e) {
    out.push_back(e.what());
  }
  const double sum = c.split.train + c.split.validation + c.split.test;
  if (!(c.split.train > 0 && c.split.validation > 0 && c.split.test > 0) || std::abs(sum - 1.0) > 1e-9) {
    out.push_back("data.split ratios must be positive and sum to 1");
  }
  if (c.llm.retries < 0) out.push_back("llm.retries must be >= 0");
  if (c.llm.max_in_flight < 1) out.push_back("llm.max_in_flight must be >= 1");
  return out;
}

/// Parses a run config (TOML-style key/value file) and reports every
/// violation at once. Relative paths resolve against the file's directory.
inline RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
  using detail::Scalar;
  const auto table = detail::parse_keyvalue(text);
  std::vector<std::string> errs;
  std::set<std::string> used;
  RunConfig c;

  auto where = [](const std::string& key, const detail::ConfigValue& v) {
    return key + " (line " + std::to_string(v.line) + ")";
  };
  auto find = [&](const std::string& key) -> const detail::ConfigValue* {
    auto it = table.find(key);
    if (it == table.end()) return nullptr;
    used.insert(key);
    return &it->second;
  };
  auto get_string = [&](const std::string& key, auto&& apply) {
    if (auto* v = find(key)) {
      auto* s = std::get_if<Scalar>(&v->value);
      if (!s || !std::holds_alternative<std::string>(*s)) {
        errs.push_back(where(key, *v) + " must be a string");
        return;
      }
      try {
        apply(std::get<std::string>(*s));
      } catch (const Error& e) {
        errs.push_back(where(key, *v) + ": " + e.what());
      }
    }
  };
  auto get_number = [&](const std::string& key, auto&& apply) {
    if (auto* v = find(key)) {
      auto* s = std::get_if<Scalar>(&v->value);
      if (s && std::holds_alternative<long long>(*s)) {
        apply(static_cast<double>(std::get<long long>(*s)));
      } else if (s && std::holds_alternative<double>(*s)) {
        apply(std::get<double>(*s));
      } else {
        errs.push_back(where(key, *v) + " must be a number");
      }
    }
  };
  auto path_of = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return (fp.is_relative() && !base_dir.empty() ? base_dir / fp : fp).string();
  };

  get_string("run.phase", [&](const std::string& s) {
    auto p = try_parse_phase(s);
    if (!p) throw Error(ErrorCode::ConfigError, "unknown phase '" + s + "'");
    c.phase = *p;
  });
  get_string("run.mode", [&](const std::string& s) { c.mode = parse_mode(s); });
  get_string("run.output_dir", [&](const std::string& s) { c.output_dir = path_of(s); });
  get_string("run.pooling", [&](const std::string& s) { c.pooling = parse_pooling(s); });
  if (auto* v = find("run.parallel")) {
    auto* s = std::get_if<Scalar>(&v->value);
    if (s && std::holds_alternative<bool>(*s)) {
      c.parallel = std::get<bool>(*s);
    } else {
      errs.push_back(where("run.parallel", *v) + " must be true or false");
    }
  }
  if (auto* v = find("run.encoders")) {
    auto* arr = std::get_if<std::vector<Scalar>>(&v->value);
    if (!arr) {
      errs.push_back(where("run.encoders", *v) + " must be an array of strings");
    } else {
      c.encoders.clear();
      for (const auto& item : *arr) {
        if (!std::holds_alternative<std::string>(item)) {
          errs.push_back(where("run.encoders", *v) + " must be an array of strings");
          break;
        }
        c.encoders.push_back(std::get<std::string>(item));
      }
    }
  }

  get_string("data.primary", [&](const std::string& s) { c.primary_path = path_of(s); });
  get_string("data.enhanced", [&](const std::string& s) { c.enhanced_path = path_of(s); });
  get_string("data.augmented", [&](const std::string& s) { c.augmented_path = path_of(s); });
  get_number("data.split_seed", [&](double d) { c.split_seed = static_cast<std::uint64_t>(d); });
  if (auto* v = find("data.split")) {
    auto* arr = std::get_if<std::vector<Scalar>>(&v->value);
    std::vector<double> r;
    if (arr) {
      for (const auto& item : *arr) {
        if (auto* d = std::get_if<double>(&item)) r.push_back(*d);
        else if (auto* i = std::get_if<long long>(&item)) r.push_back(static_cast<double>(*i));
      }
    }
    if (r.size() != 3) {
      errs.push_back(where("data.split", *v) + " must be an array of three numbers");
    } else {
      c.split = {r[0], r[1], r[2]};
    }
  }

  get_number("training.max_epochs", [&](double d) { c.training.max_epochs = static_cast<int>(d); });
  if (auto* v = table.count("training.patience") ? &table.at("training.patience") : nullptr) {
    auto* s = std::get_if<Scalar>(&v->value);
    if (s && std::holds_alternative<std::string>(*s) && std::get<std::string>(*s) == "inf") {
      used.insert("training.patience");
      c.training.patience = kUnlimitedPatience;
    } else {
      get_number("training.patience", [&](double d) { c.training.patience = static_cast<int>(d); });
    }
  }
  get_number("training.divergence_gap", [&](double d) { c.training.divergence_gap = d; });
  get_number("training.learning_rate", [&](double d) { c.training.learning_rate = d; });
  get_number("training.batch_size", [&](double d) { c.training.batch_size = static_cast<int>(d); });
  get_number("training.seed", [&](double d) { c.training.seed = static_cast<std::uint64_t>(d); });

  get_string("llm.client", [&](const std::string& s) {
    if (s == "mock") c.llm.client = ClientKind::Mock;
    else if (s == "remote") c.llm.client = ClientKind::Remote;
    else throw Error(ErrorCode::ConfigError, "client must be mock or remote");
  });
  get_string("llm.fixture", [&](const std::string& s) { c.llm.fixture = path_of(s); });
  get_string("llm.base_url", [&](const std::string& s) { c.llm.base_url = s; });
  get_string("llm.model", [&](const std::string& s) { c.llm.model = s; });
  get_string("llm.api_key_env", [&](const std::string& s) { c.llm.api_key_env = s; });
  get_string("llm.language", [&](const std::string& s) { c.llm.language = parse_language(s); });
  get_number("llm.retries", [&](double d) { c.llm.retries = static_cast<int>(d); });
  get_number("llm.max_in_flight", [&](double d) { c.llm.max_in_flight = static_cast<int>(d); });

  for (const auto& [key, v] : table) {
    if (!used.count(key)) errs.push_back("unknown key " + where(key, v));
  }
  c.training.mode = c.mode;
  for (auto& v : config_violations(c)) errs.push_back(std::move(v));
  if (!errs.empty()) throw ConfigValidationError(std::move(errs));
  return c;
}

inline RunConfig validate_config(const std::string& path) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return parse_config(text, std::filesystem::path(path).parent_path());
}

}  // namespace ironia
