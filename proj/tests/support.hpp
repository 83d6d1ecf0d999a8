#pragma once

// Test-only helpers: fixtures, temp directories and the independent oracles
// the suites compare the library against. Nothing here calls into the code
// paths it is used to check.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "ironia/corpus.hpp"
#include "ironia/head.hpp"
#include "ironia/label.hpp"
#include "ironia/llm.hpp"
#include "ironia/metrics.hpp"
#include "ironia/review.hpp"
#include "ironia/train.hpp"

namespace ironia::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ironia-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Entry make_entry(const std::string& id, const std::string& text, std::optional<Label> label = std::nullopt,
                        Mode mode = Mode::Multiclass) {
  Entry e;
  e.id = id;
  e.text = text;
  e.label = label;
  if (label) e.category_encoded = encode(*label, mode);
  return e;
}

/// Dataset with the given per-label counts, in label order.
inline Dataset dataset_with_counts(const std::map<Label, std::size_t>& counts, const std::string& prefix = "e",
                                   Mode mode = Mode::Multiclass) {
  Dataset ds{"fixture", mode, {}};
  std::size_t n = 0;
  for (const auto& [label, count] : counts) {
    for (std::size_t i = 0; i < count; ++i, ++n) {
      ds.entries.push_back(make_entry(prefix + std::to_string(n),
                                      "fragmento " + std::to_string(n) + " " + std::string(to_string(label)), label,
                                      mode));
    }
  }
  return ds;
}

inline std::map<Label, std::size_t> tally_labels(const Dataset& ds) {
  std::map<Label, std::size_t> m;
  for (const auto& e : ds.entries) ++m[*e.label];
  return m;
}

// ---------------------------------------------------------------------------
// Review fixtures

inline AnnotatedEntry annotated(const std::string& id, Label machine_tag) {
  Entry e = make_entry(id, "texto de prensa " + id);
  e.provenance = Provenance::Machine;
  Annotation a;
  a.entry_id = id;
  a.tag = machine_tag;
  a.explanation = "explicación " + id;
  a.raw_response = format_classification_response(machine_tag, a.explanation);
  a.model_id = "mock";
  return {e, a};
}

/// The verdict a reviewer gives to turn `machine` into `human`; an absent
/// human tag means the scan was unreadable.
inline VerdictInput verdict_for(Label machine, std::optional<Label> human, const std::string& reviewer) {
  if (!human) return {Decision::Unreadable, std::nullopt, reviewer};
  if (*human == machine) return {Decision::Accept, std::nullopt, reviewer};
  return {Decision::Override, human, reviewer};
}

/// Enqueues items with the given machine tags and resolves each one so the
/// final tags equal `human`.
inline void resolve_all(ReviewQueue& q, const std::vector<Label>& machine,
                        const std::vector<std::optional<Label>>& human, const std::string& prefix = "r") {
  std::vector<AnnotatedEntry> batch;
  for (std::size_t i = 0; i < machine.size(); ++i) batch.push_back(annotated(prefix + std::to_string(i), machine[i]));
  q.enqueue(batch);
  for (std::size_t i = 0; i < machine.size(); ++i) {
    auto item = q.next_pending("rev");
    const auto idx = std::stoul(item->entry.id.substr(prefix.size()));
    q.submit_verdict(item->entry.id, verdict_for(machine[idx], human[idx], "rev"));
  }
}

/// Machine and human tag columns with the given marginals, paired so the
/// two columns disagree on a good share of items.
inline std::pair<std::vector<Label>, std::vector<std::optional<Label>>> paired_columns(
    const std::map<Label, std::size_t>& machine, const std::map<Label, std::size_t>& human, std::size_t unreadable,
    std::uint64_t seed) {
  std::vector<Label> m;
  for (const auto& [l, n] : machine) m.insert(m.end(), n, l);
  std::vector<std::optional<Label>> h;
  for (const auto& [l, n] : human) h.insert(h.end(), n, l);
  h.insert(h.end(), unreadable, std::nullopt);
  std::mt19937_64 rng(seed);
  std::shuffle(h.begin(), h.end(), rng);
  return {m, h};
}

// ---------------------------------------------------------------------------
// Metrics oracle: expands the matrix into individual (gold, predicted) pairs
// and counts hits per class one sample at a time.

struct OracleMetrics {
  std::vector<double> precision, recall, f1;
  std::vector<double> support;
  double accuracy = 0.0;
  double weighted_p = 0, weighted_r = 0, weighted_f1 = 0;
  double macro_p = 0, macro_r = 0, macro_f1 = 0;
};

inline OracleMetrics brute_force_metrics(const ConfusionMatrix& c) {
  std::vector<std::pair<int, int>> samples;
  for (std::size_t g = 0; g < c.k; ++g)
    for (std::size_t p = 0; p < c.k; ++p)
      for (std::uint64_t n = 0; n < c.at(g, p); ++n) samples.emplace_back(int(g), int(p));
  const int k = static_cast<int>(c.k);
  OracleMetrics o;
  double correct = 0;
  for (auto [g, p] : samples) correct += (g == p);
  o.accuracy = correct / static_cast<double>(samples.size());
  for (int cls = 0; cls < k; ++cls) {
    double tp = 0, fp = 0, fn = 0;
    for (auto [g, p] : samples) {
      if (g == cls && p == cls) tp += 1;
      else if (p == cls) fp += 1;
      else if (g == cls) fn += 1;
    }
    const double prec = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    const double rec = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
    const double f = (prec + rec) > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    o.precision.push_back(prec);
    o.recall.push_back(rec);
    o.f1.push_back(f);
    o.support.push_back(tp + fn);
  }
  const double n = static_cast<double>(samples.size());
  for (int cls = 0; cls < k; ++cls) {
    o.weighted_p += o.support[cls] * o.precision[cls] / n;
    o.weighted_r += o.support[cls] * o.recall[cls] / n;
    o.weighted_f1 += o.support[cls] * o.f1[cls] / n;
    o.macro_p += o.precision[cls] / k;
    o.macro_r += o.recall[cls] / k;
    o.macro_f1 += o.f1[cls] / k;
  }
  return o;
}

inline ConfusionMatrix random_confusion(std::mt19937_64& rng, std::size_t k, std::uint64_t max_count) {
  ConfusionMatrix c(k);
  std::uniform_int_distribution<std::uint64_t> d(0, max_count);
  do {
    for (auto& v : c.counts) v = d(rng);
    // Occasionally zero a row or column to exercise degenerate classes.
    if (rng() % 5 == 0) {
      const std::size_t z = rng() % k;
      for (std::size_t j = 0; j < k; ++j) ((rng() & 1) ? c.at(z, j) : c.at(j, z)) = 0;
    }
  } while (c.total() == 0);
  return c;
}

// ---------------------------------------------------------------------------
// Straight-line head oracle: explicit matrix-vector loops, textbook formulas.

inline std::vector<double> oracle_scores(const HeadParams& p, const std::vector<double>& x) {
  const std::size_t in = 768, hid = 50, out = p.output_dim;
  std::vector<double> h(hid);
  for (std::size_t j = 0; j < hid; ++j) {
    double s = p.b1[j];
    for (std::size_t i = 0; i < in; ++i) s += x[i] * p.w1[i * hid + j];
    h[j] = s > 0 ? s : 0;
  }
  std::vector<double> z(out);
  for (std::size_t k = 0; k < out; ++k) {
    double s = p.b2[k];
    for (std::size_t j = 0; j < hid; ++j) s += h[j] * p.w2[j * out + k];
    z[k] = s;
  }
  std::vector<double> y(out);
  if (out == 4) {
    double denom = 0;
    for (double v : z) denom += std::exp(v);
    for (std::size_t k = 0; k < out; ++k) y[k] = std::exp(z[k]) / denom;
  } else {
    for (std::size_t k = 0; k < out; ++k) y[k] = 1.0 / (1.0 + std::exp(-z[k]));
  }
  return y;
}

inline double oracle_loss(const HeadParams& p, const std::vector<double>& x, int label) {
  const auto y = oracle_scores(p, x);
  if (p.output_dim == 4) return -std::log(y[label]);
  double total = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double t = static_cast<int>(k) == label ? 1.0 : 0.0;
    total += -(t * std::log(y[k]) + (1 - t) * std::log(1 - y[k]));
  }
  return total / static_cast<double>(y.size());
}

inline HeadParams random_head(std::size_t output_dim, std::mt19937_64& rng, double scale = 0.1) {
  HeadParams p = HeadParams::zeros(output_dim);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (auto block : p.blocks())
    for (double& v : block) v = d(rng);
  return p;
}

inline std::vector<double> random_input(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> x(768);
  for (double& v : x) v = d(rng);
  return x;
}

/// Norm-wise relative error between analytic and finite-difference
/// gradients over a set of coordinates of one parameter block.
struct GradCheck {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

inline GradCheck finite_difference_check(const HeadParams& head, const std::vector<double>& x, int label,
                                         std::mt19937_64& rng, std::size_t w1_samples, double step = 1e-5) {
  HeadParams analytic = HeadParams::zeros(head.output_dim);
  accumulate_gradient(head, x, label, analytic);
  HeadParams probe = head;
  GradCheck out;
  auto pb = probe.blocks();
  auto ab = analytic.blocks();
  for (std::size_t blk = 0; blk < 4; ++blk) {
    std::vector<std::size_t> coords;
    if (blk == 0 && w1_samples < pb[0].size()) {
      for (std::size_t s = 0; s < w1_samples; ++s) coords.push_back(rng() % pb[0].size());
    } else {
      for (std::size_t i = 0; i < pb[blk].size(); ++i) coords.push_back(i);
    }
    double diff2 = 0, a2 = 0, n2 = 0;
    for (std::size_t i : coords) {
      const double orig = pb[blk][i];
      pb[blk][i] = orig + step;
      const double up = oracle_loss(probe, x, label);
      pb[blk][i] = orig - step;
      const double down = oracle_loss(probe, x, label);
      pb[blk][i] = orig;
      const double numeric = (up - down) / (2 * step);
      const double a = ab[blk][i];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-300});
    const double rel = (a2 == 0 && n2 == 0) ? 0.0 : std::sqrt(diff2) / denom;
    out.max_relative_error = std::max(out.max_relative_error, rel);
    out.coordinates += coords.size();
  }
  return out;
}

/// First epoch at which the divergence rule fires on a scripted loss
/// schedule, or 0 when it never does. Written from the rule's statement:
/// gap above `gap` while the best validation epoch is `patience` or more
/// epochs old.
inline int expected_stop(const std::vector<EpochLosses>& schedule, double gap, int patience) {
  double best = INFINITY;
  int best_epoch = 0;
  for (int e = 1; e <= static_cast<int>(schedule.size()); ++e) {
    const auto& l = schedule[static_cast<std::size_t>(e - 1)];
    if (l.validation < best) {
      best = l.validation;
      best_epoch = e;
    }
    if (l.validation - l.train > gap && e - best_epoch >= patience) return e;
  }
  return 0;
}

}  // namespace ironia::testing
