#pragma once

// DTW reference verifier and sequential forward floating selection (SFFS)
// of the time functions it compares.

#include "sigver/common.hpp"
#include "sigver/evaluation.hpp"
#include "sigver/features.hpp"
#include "sigver/parallel.hpp"
#include "sigver/signature_data.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace sigver {

struct DtwConfig {
  /// 1-based time-function numbers.
  std::vector<int> columns;
  /// Sakoe-Chiba half-width; the band is widened to the length difference.
  std::optional<Index> band;
};

inline void validate(const DtwConfig& cfg) {
  if (cfg.columns.empty()) throw Error("DTW needs at least one selected column");
  for (int c : cfg.columns) {
    if (c < 1 || c > kNumTimeFunctions) throw Error("DTW column " + std::to_string(c) + " out of range 1..23");
  }
}

inline DtwConfig all_columns() {
  DtwConfig cfg;
  for (int c = 1; c <= kNumTimeFunctions; ++c) cfg.columns.push_back(c);
  return cfg;
}

namespace detail {

/// Path cost ordered lexicographically by (total cost, length): among
/// equal-cost paths the shortest wins.
struct PathCost {
  double cost = std::numeric_limits<double>::infinity();
  Index length = 0;

  bool operator<(const PathCost& o) const { return cost < o.cost || (cost == o.cost && length < o.length); }
};

/// DTW over a precomputed local cost matrix with steps (1,0), (0,1), (1,1).
/// Returns total cost / path length of the best path.
template <class LocalCost>
double dtw_core(Index n, Index m, std::optional<Index> band, LocalCost&& local) {
  const Index w = band ? std::max(*band, std::abs(n - m)) : std::max(n, m);
  std::vector<PathCost> prev(static_cast<std::size_t>(m)), cur(static_cast<std::size_t>(m));
  for (Index i = 0; i < n; ++i) {
    const Index lo = std::max<Index>(0, i - w);
    const Index hi = std::min<Index>(m - 1, i + w);
    std::fill(cur.begin(), cur.end(), PathCost{});
    for (Index j = lo; j <= hi; ++j) {
      PathCost best;
      if (i == 0 && j == 0) {
        best = {0.0, 0};
      } else {
        if (i > 0) best = std::min(best, prev[static_cast<std::size_t>(j)]);
        if (j > 0) best = std::min(best, cur[static_cast<std::size_t>(j - 1)]);
        if (i > 0 && j > 0) best = std::min(best, prev[static_cast<std::size_t>(j - 1)]);
      }
      if (best.cost == std::numeric_limits<double>::infinity()) continue;
      cur[static_cast<std::size_t>(j)] = {best.cost + local(i, j), best.length + 1};
    }
    std::swap(prev, cur);
  }
  const auto& end = prev[static_cast<std::size_t>(m - 1)];
  return end.cost / static_cast<double>(end.length);
}

}  // namespace detail

/// Length-normalised DTW distance with squared-Euclidean local cost over the
/// selected columns. Only the valid steps of each sequence take part.
inline double dtw_distance(const FeatureSequence& a, const FeatureSequence& b, const DtwConfig& cfg) {
  validate(cfg);
  if (a.steps < 1 || b.steps < 1) throw Error("DTW needs non-empty sequences");
  require_shape(a.cols() >= kNumTimeFunctions && b.cols() >= kNumTimeFunctions, "DTW needs 23-column sequences");
  std::vector<Index> cols;
  for (int c : cfg.columns) cols.push_back(c - 1);
  return detail::dtw_core(a.steps, b.steps, cfg.band, [&](Index i, Index j) {
    double d = 0.0;
    for (Index c : cols) {
      const double diff = a.values(i, c) - b.values(j, c);
      d += diff * diff;
    }
    return d;
  });
}

/// Verification scores (negated distances) for every pair, in pair order.
inline std::vector<PairScore> dtw_scores(const PairList& pairs, std::span<const FeatureSequence> features,
                                         const DtwConfig& cfg, unsigned workers = 1) {
  std::vector<PairScore> out(pairs.pairs.size());
  parallel_for(out.size(), workers, [&](std::size_t k) {
    const auto& p = pairs.pairs[k];
    out[k] = {p.user, p.enrollment_slot, p.probe_slot, p.label,
              -dtw_distance(features[p.enrollment], features[p.probe], cfg)};
  });
  return out;
}

// ---------------------------------------------------------------------------
// SFFS

struct SffsStep {
  enum class Action { Add, Remove } action = Action::Add;
  int column = 0;
  std::vector<int> subset;
  double eer_percent = 0.0;
};

struct SffsResult {
  std::vector<int> selected;
  double eer_percent = 0.0;
  std::vector<SffsStep> steps;
};

struct SffsOptions {
  std::size_t k_max = 9;
  /// A step must lower the EER by more than this (percentage points).
  double min_improvement = 0.0;
  int enrollments = 4;
  std::optional<Index> band;
  unsigned workers = 1;
};

namespace detail {

/// 4vs1 EER for `base` plus each candidate column in turn. The base local
/// cost matrix of each pair is built once and shared by all candidates.
inline std::vector<double> candidate_eers(const PairList& pairs, std::span<const FeatureSequence> features,
                                          const std::vector<int>& base, const std::vector<int>& candidates,
                                          const SffsOptions& opt) {
  std::vector<std::vector<double>> scores(candidates.size(), std::vector<double>(pairs.pairs.size()));
  parallel_for(pairs.pairs.size(), opt.workers, [&](std::size_t k) {
    const auto& a = features[pairs.pairs[k].enrollment];
    const auto& b = features[pairs.pairs[k].probe];
    Matrix cost = Matrix::Zero(a.steps, b.steps);
    for (int c : base) {
      for (Index j = 0; j < b.steps; ++j)
        for (Index i = 0; i < a.steps; ++i) {
          const double d = a.values(i, c - 1) - b.values(j, c - 1);
          cost(i, j) += d * d;
        }
    }
    for (std::size_t q = 0; q < candidates.size(); ++q) {
      const Index c = candidates[q] - 1;
      scores[q][k] = -dtw_core(a.steps, b.steps, opt.band, [&](Index i, Index j) {
        const double d = a.values(i, c) - b.values(j, c);
        return cost(i, j) + d * d;
      });
    }
  });
  std::vector<double> eers;
  for (const auto& s : scores) {
    std::vector<PairScore> ps(pairs.pairs.size());
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const auto& p = pairs.pairs[k];
      ps[k] = {p.user, p.enrollment_slot, p.probe_slot, p.label, s[k]};
    }
    eers.push_back(compute_eer(aggregate_4vs1(ps, opt.enrollments)).eer_percent);
  }
  return eers;
}

}  // namespace detail

/// Sequential forward floating selection minimising the development 4vs1 EER
/// of the DTW scorer. Ties go to the lowest column number.
inline SffsResult sffs_select(const PairList& dev_pairs, std::span<const FeatureSequence> features,
                              const SffsOptions& opt = {}) {
  if (dev_pairs.count(1) == 0 || dev_pairs.count(0) == 0) {
    throw Error("feature selection needs both genuine and impostor development pairs");
  }
  if (opt.k_max == 0) throw Error("k_max must be positive");
  const std::size_t k_max = std::min<std::size_t>(opt.k_max, kNumTimeFunctions);

  std::map<std::vector<int>, double> memo;
  auto subset_eer = [&](std::vector<int> subset) {
    std::sort(subset.begin(), subset.end());
    if (auto it = memo.find(subset); it != memo.end()) return it->second;
    const int last = subset.back();
    subset.pop_back();
    const double eer = detail::candidate_eers(dev_pairs, features, subset, {last}, opt).front();
    subset.push_back(last);
    memo[subset] = eer;
    return eer;
  };

  SffsResult res;
  std::vector<int> selected;
  std::map<std::size_t, double> best_by_size;
  double current = 100.0 + opt.min_improvement + 1.0;
  while (selected.size() < k_max) {
    std::vector<int> candidates;
    for (int c = 1; c <= kNumTimeFunctions; ++c) {
      if (std::find(selected.begin(), selected.end(), c) == selected.end()) candidates.push_back(c);
    }
    const auto eers = detail::candidate_eers(dev_pairs, features, selected, candidates, opt);
    std::size_t best = 0;
    for (std::size_t q = 1; q < eers.size(); ++q) {
      if (eers[q] < eers[best]) best = q;
    }
    if (!(eers[best] < current - opt.min_improvement)) break;
    selected.push_back(candidates[best]);
    std::sort(selected.begin(), selected.end());
    memo[selected] = eers[best];
    current = eers[best];
    best_by_size[selected.size()] = std::min(best_by_size.count(selected.size()) ? best_by_size[selected.size()] : 1e300,
                                             current);
    res.steps.push_back({SffsStep::Action::Add, candidates[best], selected, current});
    const int added = candidates[best];

    // Conditional exclusion: drop a feature while that beats the best subset
    // of the smaller size found so far.
    while (selected.size() > 2) {
      std::optional<std::size_t> drop;
      double drop_eer = 0.0;
      for (std::size_t q = 0; q < selected.size(); ++q) {
        if (selected[q] == added && res.steps.back().action == SffsStep::Action::Add) continue;
        std::vector<int> reduced = selected;
        reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(q));
        const double e = subset_eer(reduced);
        if (!drop || e < drop_eer) {
          drop = q;
          drop_eer = e;
        }
      }
      const std::size_t smaller = selected.size() - 1;
      const double reference = best_by_size.count(smaller) ? best_by_size[smaller] : 1e300;
      if (!drop || !(drop_eer < reference - opt.min_improvement)) break;
      const int removed = selected[*drop];
      selected.erase(selected.begin() + static_cast<std::ptrdiff_t>(*drop));
      current = drop_eer;
      best_by_size[smaller] = drop_eer;
      res.steps.push_back({SffsStep::Action::Remove, removed, selected, current});
    }
  }
  res.selected = selected;
  res.eer_percent = selected.empty() ? 100.0 : current;
  return res;
}

/// Text report: one line per SFFS step with the subset and its dev EER.
inline void write_sffs_report(std::ostream& out, const SffsResult& r) {
  out << "# SFFS over DTW, criterion: development 4vs1 EER (%)\n";
  for (std::size_t k = 0; k < r.steps.size(); ++k) {
    const auto& s = r.steps[k];
    out << "step " << (k + 1) << ' ' << (s.action == SffsStep::Action::Add ? "add" : "remove") << ' ' << s.column
        << " subset";
    for (int c : s.subset) out << ' ' << c;
    out << " eer " << s.eer_percent << '\n';
  }
  out << "selected";
  for (int c : r.selected) out << ' ' << c;
  out << "\neer " << r.eer_percent << '\n';
}

}  // namespace sigver
