#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <memory>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "ironia/corpus.hpp"
#include "ironia/error.hpp"
#include "ironia/label.hpp"
#include "ironia/llm.hpp"

namespace ironia {

enum class Decision { Accept, Override, Unreadable };
enum class ItemStatus { Pending, Assigned, Resolved };

constexpr std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::Accept: return "accept";
    case Decision::Override: return "override";
    case Decision::Unreadable: return "unreadable";
  }
  return "";
}

constexpr std::string_view to_string(ItemStatus s) {
  switch (s) {
    case ItemStatus::Pending: return "pending";
    case ItemStatus::Assigned: return "assigned";
    case ItemStatus::Resolved: return "resolved";
  }
  return "";
}

inline Decision parse_decision(std::string_view s) {
  if (s == "accept") return Decision::Accept;
  if (s == "override") return Decision::Override;
  if (s == "unreadable") return Decision::Unreadable;
  throw Error(ErrorCode::InvalidVerdict, "unknown decision '" + std::string(s) + "'");
}

/// What a reviewer submits.
struct VerdictInput {
  Decision decision = Decision::Accept;
  std::optional<Label> override_tag;
  std::string reviewer_id;
};

struct Verdict {
  Decision decision = Decision::Accept;
  std::optional<Label> override_tag;
  std::string reviewer_id;
  Millis decided_at = 0;
  std::optional<Label> final_tag;  // machine tag, override tag, or none when unreadable
};

struct ReviewItem {
  Entry entry;
  Annotation annotation;
  ItemStatus status = ItemStatus::Pending;
  std::optional<std::string> assigned_to;
  std::optional<Millis> lease_expiry;
  std::optional<Verdict> verdict;
};

struct AnnotatedEntry {
  Entry entry;
  Annotation annotation;
};

inline nlohmann::json to_json(const Verdict& v) {
  nlohmann::json j = {{"decision", std::string(to_string(v.decision))},
                      {"reviewer_id", v.reviewer_id},
                      {"decided_at", v.decided_at}};
  j["override_tag"] = v.override_tag ? nlohmann::json(std::string(to_string(*v.override_tag))) : nlohmann::json(nullptr);
  j["final_tag"] = v.final_tag ? nlohmann::json(std::string(to_string(*v.final_tag))) : nlohmann::json(nullptr);
  return j;
}

inline Verdict verdict_from_json(const nlohmann::json& j) {
  Verdict v;
  v.decision = parse_decision(j.at("decision").get<std::string>());
  v.reviewer_id = j.at("reviewer_id").get<std::string>();
  v.decided_at = j.value("decided_at", Millis{0});
  if (j.contains("override_tag") && !j["override_tag"].is_null()) {
    v.override_tag = parse_label(j["override_tag"].get<std::string>(), Mode::Multiclass);
  }
  if (j.contains("final_tag") && !j["final_tag"].is_null()) {
    v.final_tag = parse_label(j["final_tag"].get<std::string>(), Mode::Multiclass);
  }
  return v;
}

inline nlohmann::json to_json(const ReviewItem& item) {
  nlohmann::json j = {{"entry", to_json(item.entry)},
                      {"annotation", to_json(item.annotation)},
                      {"status", std::string(to_string(item.status))}};
  j["assigned_to"] = item.assigned_to ? nlohmann::json(*item.assigned_to) : nlohmann::json(nullptr);
  j["lease_expiry"] = item.lease_expiry ? nlohmann::json(*item.lease_expiry) : nlohmann::json(nullptr);
  j["verdict"] = item.verdict ? to_json(*item.verdict) : nlohmann::json(nullptr);
  return j;
}

/// Marginal tag distributions of machine and human labels over the same
/// items. Only the human side has an unreadable share.
struct AgreementReport {
  std::size_t total = 0;
  std::map<Label, std::size_t> machine_counts;
  std::map<Label, std::size_t> human_counts;
  std::size_t unreadable = 0;

  double machine_percent(Label l) const { return percent(count_of(machine_counts, l)); }
  double human_percent(Label l) const { return percent(count_of(human_counts, l)); }
  double unreadable_percent() const { return percent(unreadable); }

 private:
  static std::size_t count_of(const std::map<Label, std::size_t>& m, Label l) {
    auto it = m.find(l);
    return it == m.end() ? 0 : it->second;
  }
  double percent(std::size_t n) const {
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(n) / static_cast<double>(total);
  }
};

inline nlohmann::json to_json(const AgreementReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (Label l : kMulticlassLabels) {
    rows.push_back({{"tag", std::string(to_string(l))},
                    {"machine_count", r.machine_counts.count(l) ? r.machine_counts.at(l) : 0},
                    {"machine_percent", r.machine_percent(l)},
                    {"human_count", r.human_counts.count(l) ? r.human_counts.at(l) : 0},
                    {"human_percent", r.human_percent(l)}});
  }
  return {{"total", r.total},
          {"rows", rows},
          {"unreadable_count", r.unreadable},
          {"unreadable_percent", r.unreadable_percent()}};
}

struct QueueCounts {
  std::size_t pending = 0;
  std::size_t assigned = 0;
  std::size_t resolved = 0;
  std::size_t total = 0;
};

/// Append-only JSONL event log with strictly increasing sequence numbers.
class EventLog {
 public:
  EventLog() = default;
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;
  ~EventLog() {
    if (file_) std::fclose(file_);
  }

  /// Reads every event already in `path` and keeps the file open for appends.
  std::vector<nlohmann::json> open(const std::string& path, bool sync_each_write) {
    std::vector<nlohmann::json> events;
    if (FILE* existing = std::fopen(path.c_str(), "rb")) {
      std::fclose(existing);
      std::size_t line_no = 0;
      for (const auto& line : detail::split_lines(detail::read_file(path))) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("seq")) {
          throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + " malformed event");
        }
        const auto seq = j["seq"].get<std::uint64_t>();
        if (seq <= last_seq_) {
          throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + " sequence not increasing");
        }
        last_seq_ = seq;
        events.push_back(std::move(j));
      }
    }
    file_ = std::fopen(path.c_str(), "ab");
    if (!file_) throw Error(ErrorCode::FileError, "cannot open event log " + path);
    sync_ = sync_each_write;
    return events;
  }

  void append(nlohmann::json event) {
    event["seq"] = ++last_seq_;
    if (!file_) return;
    const std::string line = event.dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
      throw Error(ErrorCode::FileError, "event log write failed");
    }
    if (sync_) ::fsync(::fileno(file_));
  }

  std::uint64_t last_seq() const { return last_seq_; }

 private:
  FILE* file_ = nullptr;
  std::uint64_t last_seq_ = 0;
  bool sync_ = true;
};

struct ReviewOptions {
  std::chrono::milliseconds lease{std::chrono::minutes(30)};
  std::function<Millis()> clock = system_now_ms;
  bool sync_each_write = true;
};

/// Human verification queue. All mutations go through one mutex and are
/// appended to the event log before they become visible.
class ReviewQueue {
 public:
  explicit ReviewQueue(ReviewOptions options = {}) : options_(std::move(options)) {}

  /// Opens (or creates) a file-backed queue, replaying its event log.
  static std::unique_ptr<ReviewQueue> open(const std::string& log_path, ReviewOptions options = {}) {
    auto q = std::make_unique<ReviewQueue>(std::move(options));
    for (const auto& ev : q->log_.open(log_path, q->options_.sync_each_write)) q->replay(ev);
    return q;
  }

  std::size_t enqueue(const std::vector<AnnotatedEntry>& batch) {
    std::lock_guard lock(mutex_);
    std::unordered_map<std::string, bool> fresh;
    for (const auto& a : batch) {
      if (a.entry.id != a.annotation.entry_id) {
        throw Error(ErrorCode::ContractViolation, "annotation does not belong to entry '" + a.entry.id + "'");
      }
      if (index_.count(a.entry.id) || !fresh.emplace(a.entry.id, true).second) {
        throw Error(ErrorCode::DuplicateId, "entry '" + a.entry.id + "' already queued");
      }
    }
    const Millis now = options_.clock();
    for (const auto& a : batch) {
      log_.append({{"type", "enqueue"}, {"at", now}, {"entry", to_json(a.entry)},
                   {"annotation", to_json(a.annotation)}});
      add_item(a.entry, a.annotation);
    }
    return batch.size();
  }

  /// Oldest pending item (expired leases count as pending), now leased to
  /// `reviewer_id`.
  std::optional<ReviewItem> next_pending(const std::string& reviewer_id) {
    std::lock_guard lock(mutex_);
    const Millis now = options_.clock();
    for (auto& item : items_) {
      if (effective_status(item, now) != ItemStatus::Pending) continue;
      const Millis expiry = now + options_.lease.count();
      log_.append({{"type", "assign"}, {"at", now}, {"entry_id", item.entry.id},
                   {"reviewer_id", reviewer_id}, {"lease_expiry", expiry}});
      item.status = ItemStatus::Assigned;
      item.assigned_to = reviewer_id;
      item.lease_expiry = expiry;
      return item;
    }
    return std::nullopt;
  }

  /// Resolves an item. The submitting reviewer must hold the latest
  /// assignment; a lapsed lease is still honored until someone else takes it.
  Verdict submit_verdict(const std::string& entry_id, const VerdictInput& input) {
    std::lock_guard lock(mutex_);
    auto it = index_.find(entry_id);
    if (it == index_.end()) throw Error(ErrorCode::NotFound, "entry '" + entry_id + "'");
    ReviewItem& item = items_[it->second];
    if (item.status == ItemStatus::Resolved) {
      throw Error(ErrorCode::AlreadyResolved, "entry '" + entry_id + "'");
    }
    Verdict v = make_verdict(item, input);
    if (!item.assigned_to || *item.assigned_to != input.reviewer_id) {
      throw Error(ErrorCode::NotAssigned, "entry '" + entry_id + "' is not assigned to " + input.reviewer_id);
    }
    v.decided_at = options_.clock();
    log_.append({{"type", "verdict"}, {"at", v.decided_at}, {"entry_id", entry_id}, {"verdict", to_json(v)}});
    item.status = ItemStatus::Resolved;
    item.verdict = v;
    item.lease_expiry.reset();
    return v;
  }

  AgreementReport agreement_report() const {
    std::lock_guard lock(mutex_);
    for (const auto& item : items_) {
      if (item.status != ItemStatus::Resolved) {
        throw Error(ErrorCode::IncompleteQueue, "entry '" + item.entry.id + "' is unresolved");
      }
    }
    return tally(items_);
  }

  /// Same tally restricted to resolved items; for live dashboards.
  AgreementReport resolved_agreement() const {
    std::lock_guard lock(mutex_);
    return tally(items_);
  }

  std::vector<Entry> export_verified() const {
    std::lock_guard lock(mutex_);
    std::vector<Entry> out;
    for (const auto& item : items_) {
      if (item.status != ItemStatus::Resolved) {
        throw Error(ErrorCode::IncompleteQueue, "entry '" + item.entry.id + "' is unresolved");
      }
      if (!item.verdict->final_tag) continue;
      Entry e = item.entry;
      e.label = *item.verdict->final_tag;
      e.category_encoded = encode(*e.label, Mode::Multiclass);
      e.provenance = Provenance::MachineVerified;
      out.push_back(std::move(e));
    }
    return out;
  }

  QueueCounts counts() const {
    std::lock_guard lock(mutex_);
    QueueCounts c;
    const Millis now = options_.clock();
    for (const auto& item : items_) {
      switch (effective_status(item, now)) {
        case ItemStatus::Pending: ++c.pending; break;
        case ItemStatus::Assigned: ++c.assigned; break;
        case ItemStatus::Resolved: ++c.resolved; break;
      }
    }
    c.total = items_.size();
    return c;
  }

  std::optional<ReviewItem> item(const std::string& entry_id) const {
    std::lock_guard lock(mutex_);
    auto it = index_.find(entry_id);
    if (it == index_.end()) return std::nullopt;
    ReviewItem copy = items_[it->second];
    copy.status = effective_status(copy, options_.clock());
    return copy;
  }

  std::vector<ReviewItem> snapshot() const {
    std::lock_guard lock(mutex_);
    return items_;
  }

  std::uint64_t last_sequence() const {
    std::lock_guard lock(mutex_);
    return log_.last_seq();
  }

 private:
  static ItemStatus effective_status(const ReviewItem& item, Millis now) {
    if (item.status == ItemStatus::Assigned && item.lease_expiry && *item.lease_expiry <= now) {
      return ItemStatus::Pending;
    }
    return item.status;
  }

  static Verdict make_verdict(const ReviewItem& item, const VerdictInput& input) {
    if (input.reviewer_id.empty()) throw Error(ErrorCode::InvalidVerdict, "reviewer id is empty");
    Verdict v;
    v.decision = input.decision;
    v.reviewer_id = input.reviewer_id;
    switch (input.decision) {
      case Decision::Accept:
        if (input.override_tag) throw Error(ErrorCode::InvalidVerdict, "accept takes no override tag");
        v.final_tag = item.annotation.tag;
        break;
      case Decision::Override:
        if (!input.override_tag) throw Error(ErrorCode::InvalidVerdict, "override needs a tag");
        if (!belongs_to(*input.override_tag, Mode::Multiclass)) {
          throw Error(ErrorCode::InvalidVerdict, "override tag outside the four-label set");
        }
        if (*input.override_tag == item.annotation.tag) {
          throw Error(ErrorCode::InvalidVerdict, "override tag equals the machine tag");
        }
        v.override_tag = input.override_tag;
        v.final_tag = input.override_tag;
        break;
      case Decision::Unreadable:
        if (input.override_tag) throw Error(ErrorCode::InvalidVerdict, "unreadable takes no tag");
        break;
    }
    return v;
  }

  static AgreementReport tally(const std::vector<ReviewItem>& items) {
    AgreementReport r;
    for (const auto& item : items) {
      if (item.status != ItemStatus::Resolved) continue;
      ++r.total;
      ++r.machine_counts[item.annotation.tag];
      if (item.verdict->final_tag) {
        ++r.human_counts[*item.verdict->final_tag];
      } else {
        ++r.unreadable;
      }
    }
    return r;
  }

  void add_item(const Entry& entry, const Annotation& annotation) {
    index_[entry.id] = items_.size();
    items_.push_back(ReviewItem{entry, annotation, ItemStatus::Pending, {}, {}, {}});
  }

  void replay(const nlohmann::json& ev) {
    const auto type = ev.at("type").get<std::string>();
    if (type == "enqueue") {
      add_item(entry_from_json(ev.at("entry"), Mode::Multiclass), annotation_from_json(ev.at("annotation")));
      return;
    }
    auto it = index_.find(ev.at("entry_id").get<std::string>());
    if (it == index_.end()) throw Error(ErrorCode::ParseError, "event for unknown entry");
    ReviewItem& item = items_[it->second];
    if (type == "assign") {
      item.status = ItemStatus::Assigned;
      item.assigned_to = ev.at("reviewer_id").get<std::string>();
      item.lease_expiry = ev.at("lease_expiry").get<Millis>();
    } else if (type == "verdict") {
      item.status = ItemStatus::Resolved;
      item.verdict = verdict_from_json(ev.at("verdict"));
      item.lease_expiry.reset();
    } else {
      throw Error(ErrorCode::ParseError, "unknown event type '" + type + "'");
    }
  }

  ReviewOptions options_;
  mutable std::mutex mutex_;
  EventLog log_;
  std::vector<ReviewItem> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ironia
