#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ironia/corpus.hpp"
#include "ironia/detail/random.hpp"
#include "ironia/detail/text.hpp"
#include "ironia/error.hpp"
#include "ironia/label.hpp"
#include "ironia/prompts.hpp"

namespace ironia {

using Millis = std::int64_t;

inline Millis system_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

inline constexpr std::size_t kClassificationWordCap = 500;

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.0;
  std::size_t max_output_words = kClassificationWordCap;
  // Routing metadata; never sent to a remote endpoint.
  std::string entry_id;
  std::string source_text;
};

inline void check(const CompletionRequest& req, PromptKind kind) {
  if (req.temperature < 0.0) throw Error(ErrorCode::PreconditionError, "temperature must be >= 0");
  if (req.max_output_words == 0) throw Error(ErrorCode::PreconditionError, "word cap must be positive");
  if (kind == PromptKind::Classification && req.max_output_words > kClassificationWordCap) {
    throw Error(ErrorCode::PreconditionError, "classification word cap exceeds 500");
  }
}

/// Anything that turns a prompt into raw completion text. Implementations
/// signal transient transport trouble with ErrorCode::BackendError.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

inline std::string mock_text_key(std::string_view text) {
  return "fnv1a64:" + detail::hex64(detail::fnv1a64(detail::normalize_whitespace(text)));
}

/// Fixture-backed client: looks a request up by entry id, then by the hash
/// of its source text. In identity mode it echoes the source text.
class MockClient final : public LlmClient {
 public:
  MockClient() = default;
  explicit MockClient(std::unordered_map<std::string, std::string> fixtures)
      : fixtures_(std::move(fixtures)) {}

  static MockClient identity() {
    MockClient c;
    c.identity_ = true;
    return c;
  }

  /// JSONL of {"key": ..., "response": ...}.
  static MockClient from_jsonl(const std::string& path) {
    std::unordered_map<std::string, std::string> table;
    for (const auto& line : detail::split_lines(detail::read_file(path))) {
      if (detail::trim(line).empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("key") || !j.contains("response")) {
        throw Error(ErrorCode::ParseError, "bad mock fixture line in " + path);
      }
      table[j["key"].get<std::string>()] = j["response"].get<std::string>();
    }
    return MockClient(std::move(table));
  }

  std::string complete(const CompletionRequest& request) override {
    if (identity_) return request.source_text;
    if (auto it = fixtures_.find(request.entry_id); it != fixtures_.end()) return it->second;
    if (auto it = fixtures_.find(mock_text_key(request.source_text)); it != fixtures_.end()) {
      return it->second;
    }
    throw Error(ErrorCode::BackendError, "no mock fixture for entry '" + request.entry_id + "'");
  }

  std::string model_id() const override { return identity_ ? "mock-identity" : "mock"; }

 private:
  std::unordered_map<std::string, std::string> fixtures_;
  bool identity_ = false;
};

// ---------------------------------------------------------------------------
// Response grammar:  'TAG' *explanation*

struct ParsedResponse {
  Label tag;
  std::string explanation;
};

inline ParsedResponse parse_classification_response(std::string_view raw) {
  static const std::regex tag_re(R"(^\s*(?:'|‘|’)(.+?)(?:'|‘|’))");
  static const std::regex explanation_re(R"(\*([^*]*)\*)");
  const std::string s(raw);
  std::smatch tag_match;
  if (!std::regex_search(s, tag_match, tag_re)) {
    throw Error(ErrorCode::TagParseError, "response does not start with a quoted tag");
  }
  // Tolerate punctuation left inside the quotes, as in 'IRONY,'.
  std::string tag = tag_match[1].str();
  while (!tag.empty() && std::string_view(",.;:").find(tag.back()) != std::string_view::npos) tag.pop_back();
  auto label = try_parse_label(tag);
  if (!label || !belongs_to(*label, Mode::Multiclass)) {
    throw Error(ErrorCode::TagParseError, "unknown tag '" + tag_match[1].str() + "'");
  }
  std::smatch expl;
  auto rest_begin = s.cbegin() + tag_match.position(0) + tag_match.length(0);
  if (!std::regex_search(rest_begin, s.cend(), expl, explanation_re) ||
      detail::trim(expl[1].str()).empty()) {
    throw Error(ErrorCode::ExplanationParseError, "no asterisk-delimited explanation");
  }
  return {*label, expl[1].str()};
}

/// Inverse of the parser; emits the Spanish canonical tag.
inline std::string format_classification_response(Label tag, std::string_view explanation) {
  return "'" + std::string(to_string(tag)) + "' *" + std::string(explanation) + "*";
}

struct Annotation {
  std::string entry_id;
  Label tag = Label::Neutral;
  std::string explanation;
  std::string raw_response;
  std::string model_id;
  Millis created_at = 0;
  std::vector<std::string> warnings;

  bool operator==(const Annotation&) const = default;
};

inline nlohmann::json to_json(const Annotation& a) {
  return {{"entry_id", a.entry_id},     {"tag", std::string(to_string(a.tag))},
          {"explanation", a.explanation}, {"raw_response", a.raw_response},
          {"model_id", a.model_id},     {"created_at", a.created_at},
          {"warnings", a.warnings}};
}

inline Annotation annotation_from_json(const nlohmann::json& j) {
  try {
    Annotation a;
    a.entry_id = j.at("entry_id").get<std::string>();
    a.tag = parse_label(j.at("tag").get<std::string>(), Mode::Multiclass);
    a.explanation = j.at("explanation").get<std::string>();
    a.raw_response = j.value("raw_response", std::string());
    a.model_id = j.value("model_id", std::string());
    a.created_at = j.value("created_at", Millis{0});
    a.warnings = j.value("warnings", std::vector<std::string>{});
    return a;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("annotation: ") + ex.what());
  }
}

struct BatchFailure {
  std::string entry_id;
  ErrorCode code;
  std::string message;
};

struct BatchPolicy {
  int retries = 2;
  std::chrono::milliseconds backoff{250};
  int max_in_flight = 1;
  Language language = Language::Es;
  std::function<Millis()> clock = system_now_ms;
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

struct AnnotationBatch {
  std::vector<Annotation> annotations;
  std::vector<BatchFailure> failures;
};

namespace detail {

// Calls the client, retrying only transport errors with exponential backoff.
inline std::string complete_with_retries(LlmClient& client, const CompletionRequest& req,
                                         const BatchPolicy& policy) {
  auto delay = policy.backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return client.complete(req);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BackendError || attempt >= policy.retries) throw;
    } catch (const std::exception& e) {
      if (attempt >= policy.retries) throw Error(ErrorCode::BackendError, e.what());
    }
    if (delay.count() > 0) policy.sleep(delay);
    delay *= 2;
  }
}

// Runs job(i) for i in [0, n) with at most `width` workers.
inline void run_bounded(std::size_t n, int width, const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, width)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) job(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// One request per entry. Results come back in input order; a failing entry
/// lands in `failures` and never aborts the batch.
inline AnnotationBatch annotate_batch(const std::vector<Entry>& entries, LlmClient& client,
                                      const BatchPolicy& policy = {}) {
  if (entries.empty()) throw Error(ErrorCode::PreconditionError, "annotate_batch needs entries");
  const auto tmpl = PromptTemplate::builtin(PromptKind::Classification, policy.language);
  std::vector<std::optional<Annotation>> results(entries.size());
  std::vector<std::optional<BatchFailure>> failures(entries.size());

  detail::run_bounded(entries.size(), policy.max_in_flight, [&](std::size_t i) {
    const Entry& entry = entries[i];
    try {
      CompletionRequest req;
      req.prompt = tmpl.render(entry.text);
      req.entry_id = entry.id;
      req.source_text = entry.text;
      check(req, PromptKind::Classification);
      std::string raw = detail::complete_with_retries(client, req, policy);
      auto parsed = parse_classification_response(raw);
      Annotation a;
      a.entry_id = entry.id;
      a.tag = parsed.tag;
      a.explanation = std::move(parsed.explanation);
      if (detail::count_words(raw) > req.max_output_words) {
        a.warnings.push_back("response exceeds " + std::to_string(req.max_output_words) + " words");
      }
      a.raw_response = std::move(raw);
      a.model_id = client.model_id();
      a.created_at = policy.clock();
      results[i] = std::move(a);
    } catch (const Error& e) {
      failures[i] = BatchFailure{entry.id, e.code(), e.what()};
    } catch (const std::exception& e) {
      failures[i] = BatchFailure{entry.id, ErrorCode::BackendError, e.what()};
    }
  });

  AnnotationBatch out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (results[i]) out.annotations.push_back(std::move(*results[i]));
    if (failures[i]) out.failures.push_back(std::move(*failures[i]));
  }
  return out;
}

struct EnhancedText {
  std::string entry_id;
  Label label;
  std::string original_text;
  std::string expanded_text;
};

struct EnhancementBatch {
  std::vector<EnhancedText> outputs;
  std::vector<BatchFailure> failures;
};

/// Rewrites each entry through the enhancement prompt; gold labels are
/// carried over unchanged and the original text is kept for audit.
inline EnhancementBatch enhance_batch(const std::vector<Entry>& entries, LlmClient& client,
                                      const BatchPolicy& policy = {}) {
  for (const auto& e : entries) {
    if (!e.label) throw Error(ErrorCode::PreconditionError, "entry '" + e.id + "' is unlabeled");
  }
  const auto tmpl = PromptTemplate::builtin(PromptKind::Enhancement, policy.language);
  std::vector<std::optional<EnhancedText>> results(entries.size());
  std::vector<std::optional<BatchFailure>> failures(entries.size());

  detail::run_bounded(entries.size(), policy.max_in_flight, [&](std::size_t i) {
    const Entry& entry = entries[i];
    try {
      CompletionRequest req;
      req.prompt = tmpl.render(entry.text);
      req.entry_id = entry.id;
      req.source_text = entry.text;
      req.max_output_words = 4096;
      std::string expanded = detail::trim(detail::complete_with_retries(client, req, policy));
      if (expanded.empty()) throw Error(ErrorCode::EmptyCompletion, "entry '" + entry.id + "'");
      results[i] = EnhancedText{entry.id, *entry.label, entry.text, std::move(expanded)};
    } catch (const Error& e) {
      failures[i] = BatchFailure{entry.id, e.code(), e.what()};
    } catch (const std::exception& e) {
      failures[i] = BatchFailure{entry.id, ErrorCode::BackendError, e.what()};
    }
  });

  EnhancementBatch out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (results[i]) out.outputs.push_back(std::move(*results[i]));
    if (failures[i]) out.failures.push_back(std::move(*failures[i]));
  }
  return out;
}

/// Builds the enhanced dataset version: same ids and labels, expanded text.
/// Entries without an enhancement output are dropped.
inline Dataset apply_enhancements(const Dataset& ds, const std::vector<EnhancedText>& outputs) {
  std::unordered_map<std::string, const EnhancedText*> by_id;
  for (const auto& o : outputs) by_id[o.entry_id] = &o;
  Dataset out{"enhanced", ds.mode, {}};
  for (const auto& e : ds.entries) {
    auto it = by_id.find(e.id);
    if (it == by_id.end()) continue;
    Entry copy = e;
    copy.text = it->second->expanded_text;
    copy.version_tag = VersionTag::Enhanced;
    out.entries.push_back(std::move(copy));
  }
  return out;
}

}  // namespace ironia
