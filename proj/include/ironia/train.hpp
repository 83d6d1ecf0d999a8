#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ironia/detail/random.hpp"
#include "ironia/encoder.hpp"
#include "ironia/error.hpp"
#include "ironia/head.hpp"
#include "ironia/label.hpp"
#include "ironia/metrics.hpp"

namespace ironia {

inline constexpr int kMaxEpochCap = 1500;
inline constexpr int kUnlimitedPatience = std::numeric_limits<int>::max();

struct TrainingConfig {
  int max_epochs = kMaxEpochCap;
  int patience = 50;
  double divergence_gap = 0.1;
  double learning_rate = 1e-3;
  int batch_size = 32;
  std::uint64_t seed = 13;
  Mode mode = Mode::Multiclass;

  void validate() const {
    if (max_epochs < 1 || max_epochs > kMaxEpochCap) {
      throw Error(ErrorCode::ConfigError, "max_epochs must be in [1, 1500]");
    }
    if (patience < 1) throw Error(ErrorCode::ConfigError, "patience must be >= 1");
    if (!(divergence_gap > 0.0)) throw Error(ErrorCode::ConfigError, "divergence_gap must be > 0");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::ConfigError, "learning_rate must be > 0");
    if (batch_size < 1) throw Error(ErrorCode::ConfigError, "batch_size must be >= 1");
  }
};

struct Example {
  Embedding x;
  int label = 0;  // category encoding of the mode
};

enum class StopReason { MaxEpochs, EarlyDivergence };

constexpr std::string_view to_string(StopReason r) {
  return r == StopReason::MaxEpochs ? "max_epochs" : "early_divergence";
}

struct EpochLosses {
  double train = 0.0;
  double validation = 0.0;
  bool operator==(const EpochLosses&) const = default;
};

struct TrainingHistory {
  std::vector<EpochLosses> epochs;  // epochs[e - 1] belongs to epoch e
  StopReason stop_reason = StopReason::MaxEpochs;
  int best_epoch = 0;               // 1-based
  bool operator==(const TrainingHistory&) const = default;
};

struct TrainResult {
  HeadParams head;
  TrainingHistory history;
};

/// Lets callers observe or replace the measured per-epoch losses before
/// the stopping rule sees them.
using EpochHook = std::function<EpochLosses(int epoch, const EpochLosses& measured)>;

inline double mean_loss(const HeadParams& head, std::span<const Example> data) {
  double total = 0.0;
  for (const auto& ex : data) total += example_loss(head, ex.x, ex.label);
  return total / static_cast<double>(data.size());
}

/// Mini-batch Adam on the head. After every epoch the mean train and
/// validation losses are recorded; training stops at max_epochs, or once
/// validation loss exceeds training loss by more than divergence_gap while
/// validation has not improved for `patience` epochs. Returns the
/// parameters of the best validation epoch.
inline TrainResult train(HeadParams head, std::span<const Example> train_set, std::span<const Example> val_set,
                         const TrainingConfig& config, const EpochHook& hook = {}) {
  config.validate();
  head.validate();
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training split is empty");
  if (val_set.empty()) throw Error(ErrorCode::EmptyDataset, "validation split is empty");
  if (head.mode() != config.mode) throw Error(ErrorCode::DimError, "head output size does not match mode");
  for (auto split : {train_set, val_set}) {
    for (const auto& ex : split) check_label(head, ex.label);
  }

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  HeadParams m = HeadParams::zeros(head.output_dim);
  HeadParams v = HeadParams::zeros(head.output_dim);
  HeadParams grad = HeadParams::zeros(head.output_dim);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{head, {}};
  double best_val = std::numeric_limits<double>::infinity();
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    detail::shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      for (auto block : grad.blocks()) std::fill(block.begin(), block.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = train_set[order[b]];
        accumulate_gradient(head, ex.x, ex.label, grad, scale);
      }
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      auto pb = head.blocks();
      auto gb = grad.blocks();
      auto mb = m.blocks();
      auto vb = v.blocks();
      for (std::size_t blk = 0; blk < 4; ++blk) {
        for (std::size_t i = 0; i < pb[blk].size(); ++i) {
          const double g = gb[blk][i];
          mb[blk][i] = beta1 * mb[blk][i] + (1.0 - beta1) * g;
          vb[blk][i] = beta2 * vb[blk][i] + (1.0 - beta2) * g * g;
          pb[blk][i] -= config.learning_rate * (mb[blk][i] / c1) / (std::sqrt(vb[blk][i] / c2) + eps);
        }
      }
    }

    EpochLosses losses{mean_loss(head, train_set), mean_loss(head, val_set)};
    if (hook) losses = hook(epoch, losses);
    result.history.epochs.push_back(losses);

    if (losses.validation < best_val) {
      best_val = losses.validation;
      result.history.best_epoch = epoch;
      result.head = head;
    }
    const int since_best = epoch - result.history.best_epoch;
    if (losses.validation - losses.train > config.divergence_gap && since_best >= config.patience) {
      result.history.stop_reason = StopReason::EarlyDivergence;
      return result;
    }
  }
  result.history.stop_reason = StopReason::MaxEpochs;
  return result;
}

inline ConfusionMatrix confusion_of(const HeadParams& head, std::span<const Example> test_set) {
  ConfusionMatrix c(head.output_dim);
  for (const auto& ex : test_set) {
    check_label(head, ex.label);
    c.add(ex.label, predict(head, ex.x));
  }
  return c;
}

inline EvalReport evaluate(const HeadParams& head, std::span<const Example> test_set) {
  if (test_set.empty()) throw Error(ErrorCode::EmptyDataset, "test split is empty");
  return metrics_from_confusion(confusion_of(head, test_set), default_averaging(head.mode()));
}

// ---------------------------------------------------------------------------
// Checkpoint: one JSON header line, then W1, b1, W2, b2 as little-endian
// float64 arrays.

struct CheckpointMeta {
  Mode mode = Mode::Multiclass;
  std::string encoder_id;
  Pooling pooling = Pooling::FirstToken;
  std::uint64_t seed = 0;
};

inline void save_checkpoint(const std::string& path, const HeadParams& head, const CheckpointMeta& meta) {
  head.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::FileError, "cannot write " + path);
  nlohmann::json header = {{"output_dim", head.output_dim},
                           {"mode", std::string(to_string(meta.mode))},
                           {"encoder_id", meta.encoder_id},
                           {"pooling", std::string(to_string(meta.pooling))},
                           {"seed", meta.seed}};
  out << header.dump() << '\n';
  for (auto block : head.blocks()) detail::write_le_doubles(out, block);
  if (!out) throw Error(ErrorCode::FileError, "short write to " + path);
}

inline std::pair<HeadParams, CheckpointMeta> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileError, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  auto header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded()) throw Error(ErrorCode::ParseError, "bad checkpoint header in " + path);
  CheckpointMeta meta;
  HeadParams head;
  try {
    head = HeadParams::zeros(header.at("output_dim").get<std::size_t>());
    meta.mode = parse_mode(header.at("mode").get<std::string>());
    meta.encoder_id = header.at("encoder_id").get<std::string>();
    meta.pooling = parse_pooling(header.at("pooling").get<std::string>());
    meta.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("checkpoint header: ") + ex.what());
  }
  if (meta.mode != head.mode()) throw Error(ErrorCode::DimError, "checkpoint mode disagrees with output_dim");
  for (auto block : head.blocks()) detail::read_le_doubles(in, block);
  head.validate();
  return {std::move(head), meta};
}

}  // namespace ironia
