#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ironia/error.hpp"
#include "ironia/label.hpp"

namespace ironia {

/// k x k counts, rows = gold class, columns = predicted class, indexed by
/// the category encoding of the mode.
struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(std::size_t classes = 0) : k(classes), counts(classes * classes, 0) {}

  std::uint64_t& at(std::size_t gold, std::size_t predicted) { return counts[gold * k + predicted]; }
  std::uint64_t at(std::size_t gold, std::size_t predicted) const { return counts[gold * k + predicted]; }

  void add(int gold, int predicted) { ++at(static_cast<std::size_t>(gold), static_cast<std::size_t>(predicted)); }

  /// Tallies merge associatively, so partial matrices can be summed.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.k != k) throw Error(ErrorCode::DimError, "confusion matrix size mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    return *this;
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }

  bool operator==(const ConfusionMatrix&) const = default;
};

enum class Averaging { Weighted, Macro };

constexpr std::string_view to_string(Averaging a) { return a == Averaging::Weighted ? "weighted" : "macro"; }

/// Aggregate row label used in tables: "W. AVG" for the support-weighted
/// mean, "AVG" for the plain mean.
constexpr std::string_view aggregate_label(Averaging a) { return a == Averaging::Weighted ? "W. AVG" : "AVG"; }

struct ClassMetrics {
  Label label = Label::Irony;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
  bool degenerate = false;  // some ratio had a zero denominator and was set to 0
};

struct AggregateMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  Mode mode = Mode::Multiclass;
  Averaging averaging = Averaging::Weighted;
  std::vector<ClassMetrics> classes;  // in class-index order
  AggregateMetrics aggregate;
  double accuracy = 0.0;
  std::uint64_t total = 0;
  ConfusionMatrix confusion;

  /// Rows in table order: IRONY first, then the remaining classes.
  std::vector<ClassMetrics> table_rows() const {
    std::vector<ClassMetrics> rows;
    for (const auto& c : classes)
      if (c.label == Label::Irony) rows.push_back(c);
    for (const auto& c : classes)
      if (c.label != Label::Irony) rows.push_back(c);
    return rows;
  }
};

inline EvalReport metrics_from_confusion(const ConfusionMatrix& c, Averaging averaging) {
  if (c.k != 2 && c.k != 4) throw Error(ErrorCode::DimError, "confusion matrix must be 2x2 or 4x4");
  if (c.counts.size() != c.k * c.k) throw Error(ErrorCode::DimError, "confusion matrix storage mismatch");
  const std::uint64_t total = c.total();
  if (total == 0) throw Error(ErrorCode::EmptyConfusion, "confusion matrix has no counts");

  EvalReport r;
  r.mode = c.k == 4 ? Mode::Multiclass : Mode::Binary;
  r.averaging = averaging;
  r.total = total;
  r.confusion = c;
  std::uint64_t trace = 0;
  for (std::size_t i = 0; i < c.k; ++i) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < c.k; ++j) {
      row += c.at(i, j);
      col += c.at(j, i);
    }
    const auto tp = c.at(i, i);
    trace += tp;
    ClassMetrics m;
    m.label = decode(static_cast<int>(i), r.mode);
    m.support = row;
    if (col > 0) {
      m.precision = static_cast<double>(tp) / static_cast<double>(col);
    } else {
      m.degenerate = true;
    }
    if (row > 0) {
      m.recall = static_cast<double>(tp) / static_cast<double>(row);
    } else {
      m.degenerate = true;
    }
    if (m.precision + m.recall > 0.0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
      m.degenerate = true;
    }
    r.classes.push_back(m);
  }
  r.accuracy = static_cast<double>(trace) / static_cast<double>(total);

  for (const auto& m : r.classes) {
    const double w = averaging == Averaging::Weighted
                         ? static_cast<double>(m.support) / static_cast<double>(total)
                         : 1.0 / static_cast<double>(c.k);
    r.aggregate.precision += w * m.precision;
    r.aggregate.recall += w * m.recall;
    r.aggregate.f1 += w * m.f1;
  }
  return r;
}

/// Weighted for the four-way task, macro for binary, matching the
/// "W. AVG" / "AVG" rows of the result tables.
constexpr Averaging default_averaging(Mode mode) {
  return mode == Mode::Multiclass ? Averaging::Weighted : Averaging::Macro;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& m : r.classes) {
    classes.push_back({{"label", std::string(to_string(m.label))},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support},
                       {"degenerate", m.degenerate}});
  }
  return {{"mode", std::string(to_string(r.mode))},
          {"averaging", std::string(to_string(r.averaging))},
          {"classes", classes},
          {"aggregate",
           {{"label", std::string(aggregate_label(r.averaging))},
            {"precision", r.aggregate.precision},
            {"recall", r.aggregate.recall},
            {"f1", r.aggregate.f1}}},
          {"accuracy", r.accuracy},
          {"total", r.total},
          {"confusion", r.confusion.counts}};
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.mode = parse_mode(j.at("mode").get<std::string>());
    r.averaging = j.at("averaging").get<std::string>() == "weighted" ? Averaging::Weighted : Averaging::Macro;
    for (const auto& c : j.at("classes")) {
      ClassMetrics m;
      m.label = parse_label(c.at("label").get<std::string>(), r.mode);
      m.precision = c.at("precision").get<double>();
      m.recall = c.at("recall").get<double>();
      m.f1 = c.at("f1").get<double>();
      m.support = c.at("support").get<std::uint64_t>();
      m.degenerate = c.value("degenerate", false);
      r.classes.push_back(m);
    }
    const auto& a = j.at("aggregate");
    r.aggregate = {a.at("precision").get<double>(), a.at("recall").get<double>(), a.at("f1").get<double>()};
    r.accuracy = j.at("accuracy").get<double>();
    r.total = j.at("total").get<std::uint64_t>();
    r.confusion = ConfusionMatrix(r.classes.size());
    r.confusion.counts = j.at("confusion").get<std::vector<std::uint64_t>>();
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("eval report: ") + ex.what());
  }
}

}  // namespace ironia
