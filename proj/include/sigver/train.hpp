#pragma once

#include "sigver/common.hpp"
#include "sigver/parallel.hpp"
#include "sigver/siamese.hpp"
#include "sigver/signature_data.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <tuple>
#include <vector>

namespace sigver {

enum class OptimizerKind { GradientDescent, Adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  int max_iterations = 200;
  /// Stop after this many iterations without a better checkpoint; 0 disables.
  int patience = 0;
  /// Global-norm gradient clipping threshold; 0 disables.
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::Adam;
  unsigned workers = 1;
};

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate >= 0.0)) throw Error("learning rate must be non-negative");
  if (c.batch_size == 0) throw Error("batch size must be positive");
  if (c.max_iterations < 0) throw Error("iteration count must be non-negative");
  if (c.patience < 0) throw Error("patience must be non-negative");
  if (!(c.clip_norm >= 0.0)) throw Error("clip norm must be non-negative");
}

struct DevMetrics {
  double eer_1vs1 = 0.0;
  double eer_4vs1 = 0.0;
};

/// One row per training iteration (a full pass over the pair list).
struct IterationRecord {
  int iteration = 0;
  double mean_cost = 0.0;
  std::optional<DevMetrics> dev;
  double seconds = 0.0;
};

using DevEvalHook = std::function<std::optional<DevMetrics>(const SiameseModel&, int iteration)>;
/// Called once per finished iteration, before the checkpoint decision.
using ProgressHook = std::function<void(const IterationRecord&)>;

struct TrainResult {
  SiameseModel best;
  SiameseModel last;
  int best_iteration = 0;
  std::vector<IterationRecord> history;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// Plain or adaptive-moment gradient descent over the flat parameter views.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, const SiameseConfig& cfg)
      : kind_(kind), lr_(learning_rate), m_(SiameseParams::zeros(cfg)), v_(SiameseParams::zeros(cfg)) {}

  void step(SiameseParams& params, SiameseParams& grads) {
    ++t_;
    auto p = tensors(params);
    auto g = tensors(grads);
    auto m = tensors(m_);
    auto v = tensors(v_);
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (std::size_t i = 0; i < p[k].values.size(); ++i) {
        const double gi = g[k].values[i];
        if (kind_ == OptimizerKind::GradientDescent) {
          p[k].values[i] -= lr_ * gi;
          continue;
        }
        double& mi = m[k].values[i];
        double& vi = v[k].values[i];
        mi = kBeta1 * mi + (1.0 - kBeta1) * gi;
        vi = kBeta2 * vi + (1.0 - kBeta2) * gi * gi;
        p[k].values[i] -= lr_ * (mi / c1) / (std::sqrt(vi / c2) + kEps);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  OptimizerKind kind_;
  double lr_;
  SiameseParams m_;
  SiameseParams v_;
  std::int64_t t_ = 0;
};

inline double global_norm(SiameseParams& grads) {
  double sq = 0.0;
  for (const auto& t : tensors(grads))
    for (double g : t.values) sq += g * g;
  return std::sqrt(sq);
}

inline void scale(SiameseParams& grads, double factor) {
  for (auto& t : tensors(grads))
    for (double& g : t.values) g *= factor;
}

inline std::vector<LabeledPair> labeled_pairs(const PairList& pairs, std::span<const FeatureSequence> features) {
  std::vector<LabeledPair> out;
  out.reserve(pairs.pairs.size());
  for (const auto& p : pairs.pairs) {
    if (p.enrollment >= features.size() || p.probe >= features.size()) {
      throw Error("pair references a signature without features");
    }
    out.push_back({&features[p.enrollment], &features[p.probe], p.label});
  }
  return out;
}

/// Mini-batch training on the mean pair loss. Each iteration is one shuffled
/// pass over all pairs. When the hook reports development EERs the kept
/// checkpoint minimises (4vs1 EER, 1vs1 EER, cost); otherwise the cost alone.
/// Patience counts checkpoint comparisons, not iterations, and only a lower
/// development EER resets it; a cost-only tie-break win does not.
inline TrainResult train(SiameseModel model, const PairList& pairs, std::span<const FeatureSequence> features,
                         const TrainConfig& cfg, const DevEvalHook& hook = {},
                         const ProgressHook& progress = {}) {
  validate(cfg);
  const auto labeled = labeled_pairs(pairs, features);
  if (labeled.empty()) throw Error("training needs at least one pair");

  TrainResult result;
  result.best = model;
  Optimizer optimizer(cfg.optimizer, cfg.learning_rate, model.config);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses(labeled.size());
  std::optional<std::tuple<double, double, double>> best_key;
  int since_best = 0;
  const auto start = std::chrono::steady_clock::now();

  for (int iteration = 1; iteration <= cfg.max_iterations; ++iteration) {
    // Fisher-Yates with an explicit draw keeps the order independent of the
    // standard library's distribution implementations.
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<LabeledPair> batch;
      batch.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) batch.push_back(labeled[order[k]]);
      auto bg = batch_gradient(model, batch, cfg.workers);
      for (std::size_t k = begin; k < end; ++k) {
        const double loss = bg.losses[k - begin];
        if (!std::isfinite(loss) || !std::isfinite(bg.scores[k - begin])) {
          throw TrainingDiverged("non-finite loss at iteration " + std::to_string(iteration) + ", pair " +
                                 std::to_string(order[k]));
        }
        losses[order[k]] = loss;
      }
      scale(bg.grads, 1.0 / static_cast<double>(batch.size()));
      const double norm = global_norm(bg.grads);
      if (!std::isfinite(norm)) {
        throw TrainingDiverged("non-finite gradient at iteration " + std::to_string(iteration));
      }
      if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) scale(bg.grads, cfg.clip_norm / norm);
      optimizer.step(model.params, bg.grads);
    }

    IterationRecord rec;
    rec.iteration = iteration;
    // Summed in pair order, so the value does not depend on the shuffle.
    rec.mean_cost = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
    if (!std::isfinite(rec.mean_cost)) {
      throw TrainingDiverged("training cost diverged at iteration " + std::to_string(iteration));
    }
    if (hook) rec.dev = hook(model, iteration);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    if (progress) progress(rec);

    // With a hook, only iterations it evaluated compete for the checkpoint.
    if (hook && !rec.dev) continue;
    const auto key = rec.dev ? std::make_tuple(rec.dev->eer_4vs1, rec.dev->eer_1vs1, rec.mean_cost)
                             : std::make_tuple(0.0, 0.0, rec.mean_cost);
    const bool better_metric = !best_key || (rec.dev ? std::make_pair(std::get<0>(key), std::get<1>(key)) <
                                                           std::make_pair(std::get<0>(*best_key), std::get<1>(*best_key))
                                                     : std::get<2>(key) < std::get<2>(*best_key));
    if (!best_key || key < *best_key) {
      best_key = key;
      result.best = model;
      result.best_iteration = iteration;
    }
    if (better_metric) {
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  result.last = std::move(model);
  return result;
}

/// Training log: iteration, mean train cost, dev EERs (empty when not
/// evaluated) and elapsed seconds.
inline void write_training_log(std::ostream& out, const std::vector<IterationRecord>& history) {
  out << "iteration,mean_train_cost,dev_eer_1vs1,dev_eer_4vs1,wall_clock_seconds\n";
  for (const auto& r : history) {
    out << r.iteration << ',' << std::setprecision(10) << r.mean_cost << ',';
    if (r.dev) out << r.dev->eer_1vs1;
    out << ',';
    if (r.dev) out << r.dev->eer_4vs1;
    out << ',' << std::fixed << std::setprecision(3) << r.seconds << std::defaultfloat << '\n';
  }
}

}  // namespace sigver
