#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "ironia/detail/random.hpp"
#include "ironia/detail/text.hpp"
#include "ironia/error.hpp"
#include "ironia/label.hpp"

namespace ironia {

enum class Provenance { Human, Machine, MachineVerified };
enum class VersionTag { Primary, Enhanced, Augmented, Custom };
enum class DataFormat { Jsonl, Csv };

constexpr std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Human: return "human";
    case Provenance::Machine: return "machine";
    case Provenance::MachineVerified: return "machine_verified";
  }
  return "";
}

constexpr std::string_view to_string(VersionTag v) {
  switch (v) {
    case VersionTag::Primary: return "primary";
    case VersionTag::Enhanced: return "enhanced";
    case VersionTag::Augmented: return "augmented";
    case VersionTag::Custom: return "custom";
  }
  return "";
}

inline Provenance parse_provenance(std::string_view s) {
  if (s == "human") return Provenance::Human;
  if (s == "machine") return Provenance::Machine;
  if (s == "machine_verified") return Provenance::MachineVerified;
  throw Error(ErrorCode::ParseError, "unknown provenance '" + std::string(s) + "'");
}

inline VersionTag parse_version_tag(std::string_view s) {
  if (s == "primary") return VersionTag::Primary;
  if (s == "enhanced") return VersionTag::Enhanced;
  if (s == "augmented") return VersionTag::Augmented;
  if (s == "custom") return VersionTag::Custom;
  throw Error(ErrorCode::ParseError, "unknown version tag '" + std::string(s) + "'");
}

struct Entry {
  std::string id;
  std::string text;
  std::optional<Label> label;
  std::optional<int> category_encoded;
  Provenance provenance = Provenance::Human;
  VersionTag version_tag = VersionTag::Custom;

  bool operator==(const Entry&) const = default;
};

struct Dataset {
  std::string name;
  Mode mode = Mode::Multiclass;
  std::vector<Entry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

/// Checks the dataset invariants: unique ids, non-blank text, labels in the
/// active mode and category codes consistent with the fixed map.
inline void validate(const Dataset& ds) {
  std::unordered_set<std::string> seen;
  for (const auto& e : ds.entries) {
    if (!seen.insert(e.id).second) throw Error(ErrorCode::DuplicateId, "id '" + e.id + "'");
    if (detail::trim(e.text).empty()) throw Error(ErrorCode::EmptyText, "entry '" + e.id + "'");
    if (e.label) {
      if (!belongs_to(*e.label, ds.mode)) {
        throw Error(ErrorCode::UnknownLabel, "entry '" + e.id + "' has label " +
                                                 std::string(to_string(*e.label)) + " in " +
                                                 std::string(to_string(ds.mode)) + " dataset");
      }
      if (e.category_encoded && *e.category_encoded != encode(*e.label, ds.mode)) {
        throw Error(ErrorCode::ContractViolation, "entry '" + e.id + "' category_encoded mismatch");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const Entry& e) {
  nlohmann::json j;
  j["id"] = e.id;
  j["text"] = e.text;
  j["label"] = e.label ? nlohmann::json(std::string(to_string(*e.label))) : nlohmann::json(nullptr);
  j["category_encoded"] = e.category_encoded ? nlohmann::json(*e.category_encoded) : nlohmann::json(nullptr);
  j["provenance"] = std::string(to_string(e.provenance));
  j["version_tag"] = std::string(to_string(e.version_tag));
  return j;
}

/// Parses one entry object. Stored category codes are ignored and
/// recomputed from the label, so files produced with another encoding load.
inline Entry entry_from_json(const nlohmann::json& j, Mode mode) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "entry is not an object");
  Entry e;
  auto id = j.find("id");
  if (id == j.end() || id->is_null()) throw Error(ErrorCode::ParseError, "entry without id");
  e.id = id->is_string() ? id->get<std::string>() : id->dump();
  auto text = j.find("text");
  if (text == j.end() || !text->is_string()) {
    throw Error(ErrorCode::ParseError, "entry '" + e.id + "' without text");
  }
  e.text = detail::trim(text->get<std::string>());
  if (e.text.empty()) throw Error(ErrorCode::EmptyText, "entry '" + e.id + "'");
  if (auto l = j.find("label"); l != j.end() && !l->is_null()) {
    if (!l->is_string()) throw Error(ErrorCode::UnknownLabel, "entry '" + e.id + "'");
    const auto s = l->get<std::string>();
    if (!detail::trim(s).empty()) {
      e.label = parse_label(s, mode);
      e.category_encoded = encode(*e.label, mode);
    }
  }
  if (auto p = j.find("provenance"); p != j.end() && p->is_string()) {
    e.provenance = parse_provenance(p->get<std::string>());
  }
  if (auto v = j.find("version_tag"); v != j.end() && v->is_string()) {
    e.version_tag = parse_version_tag(v->get<std::string>());
  }
  return e;
}

inline std::string to_jsonl(const Dataset& ds) {
  std::string out;
  for (const auto& e : ds.entries) {
    out += to_json(e).dump();
    out.push_back('\n');
  }
  return out;
}

inline void save_jsonl(const Dataset& ds, const std::string& path) {
  detail::write_file(path, to_jsonl(ds));
}

inline Dataset parse_dataset(std::string_view contents, DataFormat format, std::string name,
                             Mode mode = Mode::Multiclass) {
  Dataset ds{std::move(name), mode, {}};
  if (format == DataFormat::Jsonl) {
    std::size_t line_no = 0;
    for (const auto& line : detail::split_lines(contents)) {
      ++line_no;
      if (detail::trim(line).empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + ex.what());
      }
      ds.entries.push_back(entry_from_json(j, mode));
    }
  } else {
    auto rows = detail::parse_csv(contents);
    if (rows.empty()) throw Error(ErrorCode::ParseError, "CSV without header row");
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < rows[0].size(); ++i) col[detail::trim(rows[0][i])] = i;
    if (!col.count("id") || !col.count("text")) {
      throw Error(ErrorCode::ParseError, "CSV header must contain id and text");
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      nlohmann::json j;
      for (const auto& [key, idx] : col) {
        if (idx < row.size()) j[key] = row[idx];
      }
      if (j.contains("label") && detail::trim(j["label"].get<std::string>()).empty()) {
        j["label"] = nullptr;
      }
      j.erase("category_encoded");
      ds.entries.push_back(entry_from_json(j, mode));
    }
  }
  validate(ds);
  return ds;
}

/// Loads a dataset file; rows without a label keep an absent label.
inline Dataset load_dataset(const std::string& path, DataFormat format,
                            Mode mode = Mode::Multiclass) {
  return parse_dataset(detail::read_file(path), format, path, mode);
}

inline DataFormat format_from_path(const std::string& path) {
  auto dot = path.rfind('.');
  if (dot != std::string::npos && path.substr(dot) == ".csv") return DataFormat::Csv;
  return DataFormat::Jsonl;
}

// ---------------------------------------------------------------------------
// Transformations

inline Dataset to_binary(const Dataset& ds) {
  if (ds.mode != Mode::Multiclass) throw Error(ErrorCode::ModeError, "dataset is already binary");
  Dataset out{ds.name, Mode::Binary, ds.entries};
  for (auto& e : out.entries) {
    if (e.label) {
      e.label = ironia::to_binary(*e.label);
      if (e.category_encoded) e.category_encoded = encode(*e.label, Mode::Binary);
    }
  }
  return out;
}

inline Dataset encode_categories(const Dataset& ds) {
  Dataset out = ds;
  for (auto& e : out.entries) {
    if (!e.label) throw Error(ErrorCode::MissingLabel, "entry '" + e.id + "'");
    e.category_encoded = encode(*e.label, ds.mode);
  }
  return out;
}

struct DistributionReport {
  struct Row {
    Label label;
    std::size_t count = 0;
    double percent = 0.0;  // exact 100*count/total

    /// Round-half-up to two decimals, computed in integer arithmetic.
    double percent_2dp(std::size_t total) const {
      const auto hundredths = (static_cast<std::uint64_t>(count) * 20000 + total) / (2 * total);
      return static_cast<double>(hundredths) / 100.0;
    }
  };
  Mode mode = Mode::Multiclass;
  std::vector<Row> rows;
  std::size_t total = 0;

  double rounded(Label label) const {
    for (const auto& r : rows)
      if (r.label == label) return r.percent_2dp(total);
    return 0.0;
  }
  std::size_t count(Label label) const {
    for (const auto& r : rows)
      if (r.label == label) return r.count;
    return 0;
  }
};

/// Rows follow the table order IRONY, NEGATIVE, NEUTRAL, POSITIVE (or
/// IRONY, NOT IRONY for binary datasets).
inline DistributionReport class_distribution(const Dataset& ds) {
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, ds.name);
  DistributionReport report;
  report.mode = ds.mode;
  report.total = ds.size();
  std::vector<Label> order;
  if (ds.mode == Mode::Multiclass) {
    order.assign(kMulticlassLabels.begin(), kMulticlassLabels.end());
  } else {
    order = {Label::Irony, Label::NotIrony};
  }
  std::map<Label, std::size_t> counts;
  for (const auto& e : ds.entries) {
    if (!e.label) throw Error(ErrorCode::MissingLabel, "entry '" + e.id + "'");
    ++counts[*e.label];
  }
  for (Label l : order) {
    const auto c = counts[l];
    report.rows.push_back({l, c, 100.0 * static_cast<double>(c) / static_cast<double>(report.total)});
  }
  return report;
}

struct SplitRatios {
  double train = 0.7;
  double validation = 0.15;
  double test = 0.15;
};

inline constexpr std::uint64_t kDefaultSplitSeed = 13;

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Stratified three-way split. Each class is shuffled with the seed and cut
/// by rounded proportions; within each part the original order is kept.
inline Splits split(const Dataset& ds, SplitRatios ratios, std::uint64_t seed = kDefaultSplitSeed) {
  const std::array<double, 3> r = {ratios.train, ratios.validation, ratios.test};
  for (double x : r) {
    if (!(x > 0.0) || !std::isfinite(x)) throw Error(ErrorCode::RatioError, "ratios must be positive");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
    throw Error(ErrorCode::RatioError, "ratios must sum to 1");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    const auto& e = ds.entries[i];
    if (!e.label) throw Error(ErrorCode::MissingLabel, "entry '" + e.id + "'");
    by_class[encode(*e.label, ds.mode)].push_back(i);
  }
  std::vector<int> part(ds.entries.size(), 0);
  std::mt19937_64 rng(seed);
  for (auto& [cls, idx] : by_class) {
    if (idx.size() < 3) {
      throw Error(ErrorCode::StratifyError,
                  "class " + std::string(to_string(decode(cls, ds.mode))) + " has fewer than 3 entries");
    }
    detail::shuffle(std::span<std::size_t>(idx), rng);
    const double n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * r[0]));
    const auto n_val = std::min(idx.size() - n_train, static_cast<std::size_t>(std::llround(n * r[1])));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      part[idx[k]] = k < n_train ? 0 : (k < n_train + n_val ? 1 : 2);
    }
  }
  Splits out{{ds.name + "/train", ds.mode, {}},
             {ds.name + "/validation", ds.mode, {}},
             {ds.name + "/test", ds.mode, {}}};
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    Dataset& target = part[i] == 0 ? out.train : (part[i] == 1 ? out.validation : out.test);
    target.entries.push_back(ds.entries[i]);
  }
  return out;
}

/// Appends human-verified machine annotations to the primary corpus.
inline Dataset merge_augmented(const Dataset& primary, const std::vector<Entry>& verified) {
  Dataset out{"augmented", primary.mode, primary.entries};
  std::unordered_set<std::string> ids;
  for (const auto& e : primary.entries) ids.insert(e.id);
  for (const auto& v : verified) {
    if (v.provenance != Provenance::MachineVerified) {
      throw Error(ErrorCode::ContractViolation, "entry '" + v.id + "' is not machine_verified");
    }
    if (!v.label) {
      throw Error(ErrorCode::ContractViolation, "entry '" + v.id + "' has no final label (unreadable?)");
    }
    if (!belongs_to(*v.label, primary.mode)) {
      throw Error(ErrorCode::UnknownLabel, "entry '" + v.id + "'");
    }
    if (!ids.insert(v.id).second) throw Error(ErrorCode::DuplicateId, "id '" + v.id + "'");
    Entry e = v;
    e.category_encoded = encode(*e.label, primary.mode);
    out.entries.push_back(std::move(e));
  }
  for (auto& e : out.entries) e.version_tag = VersionTag::Augmented;
  return out;
}

}  // namespace ironia
