#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ironia/detail/random.hpp"
#include "ironia/encoder.hpp"
#include "ironia/error.hpp"
#include "ironia/label.hpp"

namespace ironia {

inline constexpr std::size_t kHiddenDim = 50;

/// Feed-forward head 768 -> 50 (ReLU) -> output_dim. Matrices are row-major:
/// w1[i * 50 + j] connects input i to hidden unit j, w2[j * out + k]
/// connects hidden unit j to output k.
struct HeadParams {
  std::size_t output_dim = 0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;

  static HeadParams zeros(std::size_t output_dim) {
    if (output_dim != 2 && output_dim != 4) {
      throw Error(ErrorCode::DimError, "output_dim must be 2 or 4, got " + std::to_string(output_dim));
    }
    HeadParams p;
    p.output_dim = output_dim;
    p.w1.assign(kEmbeddingDim * kHiddenDim, 0.0);
    p.b1.assign(kHiddenDim, 0.0);
    p.w2.assign(kHiddenDim * output_dim, 0.0);
    p.b2.assign(output_dim, 0.0);
    return p;
  }

  Mode mode() const { return output_dim == 2 ? Mode::Binary : Mode::Multiclass; }

  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  /// The four blocks in a fixed order, for optimizers and gradient checks.
  std::array<std::span<double>, 4> blocks() { return {w1, b1, w2, b2}; }
  std::array<std::span<const double>, 4> blocks() const { return {w1, b1, w2, b2}; }

  void validate() const {
    if ((output_dim != 2 && output_dim != 4) || w1.size() != kEmbeddingDim * kHiddenDim ||
        b1.size() != kHiddenDim || w2.size() != kHiddenDim * output_dim || b2.size() != output_dim) {
      throw Error(ErrorCode::DimError, "head parameter shapes are inconsistent");
    }
    for (auto block : blocks()) {
      for (double v : block) {
        if (!std::isfinite(v)) throw Error(ErrorCode::DimError, "head parameters contain non-finite values");
      }
    }
  }

  bool operator==(const HeadParams&) const = default;
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
inline HeadParams init_head(std::size_t output_dim, std::uint64_t seed) {
  HeadParams p = HeadParams::zeros(output_dim);
  std::mt19937_64 rng(seed);
  const double a1 = 1.0 / std::sqrt(static_cast<double>(kEmbeddingDim));
  const double a2 = 1.0 / std::sqrt(static_cast<double>(kHiddenDim));
  for (double& w : p.w1) w = a1 * (2.0 * detail::unit_double(rng) - 1.0);
  for (double& w : p.w2) w = a2 * (2.0 * detail::unit_double(rng) - 1.0);
  return p;
}

struct ForwardPass {
  std::array<double, kHiddenDim> pre_hidden{};
  std::array<double, kHiddenDim> hidden{};
  std::vector<double> logits;
  std::vector<double> scores;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline std::vector<double> softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) sum += (p[k] = std::exp(z[k] - m));
  for (double& v : p) v /= sum;
  return p;
}

inline ForwardPass forward_pass(const HeadParams& head, std::span<const double> x) {
  if (x.size() != kEmbeddingDim) {
    throw Error(ErrorCode::DimError, "input has " + std::to_string(x.size()) + " values, expected 768");
  }
  ForwardPass f;
  for (std::size_t j = 0; j < kHiddenDim; ++j) f.pre_hidden[j] = head.b1[j];
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = &head.w1[i * kHiddenDim];
    for (std::size_t j = 0; j < kHiddenDim; ++j) f.pre_hidden[j] += xi * row[j];
  }
  for (std::size_t j = 0; j < kHiddenDim; ++j) f.hidden[j] = std::max(0.0, f.pre_hidden[j]);
  const std::size_t out = head.output_dim;
  f.logits.assign(head.b2.begin(), head.b2.end());
  for (std::size_t j = 0; j < kHiddenDim; ++j) {
    const double h = f.hidden[j];
    if (h == 0.0) continue;
    for (std::size_t k = 0; k < out; ++k) f.logits[k] += h * head.w2[j * out + k];
  }
  if (head.mode() == Mode::Multiclass) {
    f.scores = softmax(f.logits);
  } else {
    f.scores.resize(out);
    for (std::size_t k = 0; k < out; ++k) f.scores[k] = sigmoid(f.logits[k]);
  }
  return f;
}

/// Class scores: softmax probabilities (4 classes) or two independent
/// sigmoid activations (binary).
inline std::vector<double> forward(const HeadParams& head, std::span<const double> x) {
  return forward_pass(head, x).scores;
}

inline constexpr double kProbabilityClamp = 1e-15;

/// Loss over score vectors: negative log-likelihood of the true class for
/// softmax outputs; mean of the per-node binary cross-entropies against the
/// one-hot target for the two sigmoid nodes.
inline double loss(std::span<const double> scores, int true_label, Mode mode) {
  const int k = class_count(mode);
  if (static_cast<int>(scores.size()) != k) throw Error(ErrorCode::DimError, "score vector size mismatch");
  if (true_label < 0 || true_label >= k) {
    throw Error(ErrorCode::LabelError, "label " + std::to_string(true_label) + " out of range");
  }
  auto clamp = [](double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); };
  if (mode == Mode::Multiclass) return -std::log(clamp(scores[static_cast<std::size_t>(true_label)]));
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    const double p = clamp(scores[static_cast<std::size_t>(c)]);
    total += c == true_label ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / k;
}

namespace detail {

// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Same quantity as loss(forward(...)), computed from logits so it stays
// exact where probabilities would saturate.
inline double logit_loss(const ForwardPass& f, int label, Mode mode) {
  const auto& z = f.logits;
  if (mode == Mode::Multiclass) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s) - z[static_cast<std::size_t>(label)];
  }
  double total = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    const double y = static_cast<int>(c) == label ? 1.0 : 0.0;
    total += softplus(z[c]) - y * z[c];
  }
  return total / static_cast<double>(z.size());
}

}  // namespace detail

inline void check_label(const HeadParams& head, int label) {
  if (label < 0 || label >= static_cast<int>(head.output_dim)) {
    throw Error(ErrorCode::LabelError, "label " + std::to_string(label) + " out of range");
  }
}

/// Loss of one example as a function of the parameters.
inline double example_loss(const HeadParams& head, std::span<const double> x, int label) {
  check_label(head, label);
  return detail::logit_loss(forward_pass(head, x), label, head.mode());
}

/// Adds scale * d(loss)/d(params) into `grad` (same shapes as `head`) and
/// returns the example loss.
inline double accumulate_gradient(const HeadParams& head, std::span<const double> x, int label, HeadParams& grad,
                                  double scale = 1.0) {
  check_label(head, label);
  const ForwardPass f = forward_pass(head, x);
  const std::size_t out = head.output_dim;
  std::vector<double> dz(out);
  if (head.mode() == Mode::Multiclass) {
    for (std::size_t k = 0; k < out; ++k) dz[k] = f.scores[k] - (static_cast<int>(k) == label ? 1.0 : 0.0);
  } else {
    for (std::size_t k = 0; k < out; ++k) {
      dz[k] = (f.scores[k] - (static_cast<int>(k) == label ? 1.0 : 0.0)) / static_cast<double>(out);
    }
  }
  std::array<double, kHiddenDim> dh{};
  for (std::size_t k = 0; k < out; ++k) grad.b2[k] += scale * dz[k];
  for (std::size_t j = 0; j < kHiddenDim; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < out; ++k) {
      grad.w2[j * out + k] += scale * f.hidden[j] * dz[k];
      acc += head.w2[j * out + k] * dz[k];
    }
    dh[j] = f.pre_hidden[j] > 0.0 ? acc : 0.0;
  }
  for (std::size_t j = 0; j < kHiddenDim; ++j) grad.b1[j] += scale * dh[j];
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
    const double xi = scale * x[i];
    if (xi == 0.0) continue;
    double* row = &grad.w1[i * kHiddenDim];
    for (std::size_t j = 0; j < kHiddenDim; ++j) row[j] += xi * dh[j];
  }
  return detail::logit_loss(f, label, head.mode());
}

/// Prediction = argmax of scores; ties go to the lowest class index.
inline int predict(const HeadParams& head, std::span<const double> x) {
  const auto s = forward(head, x);
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

}  // namespace ironia
