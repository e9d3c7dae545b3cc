#pragma once

#include "sigver/common.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace sigver {

enum class Protocol { OneVsOne, FourVsOne };

inline std::string_view protocol_name(Protocol p) { return p == Protocol::OneVsOne ? "1vs1" : "4vs1"; }

/// Higher scores mean "more genuine"; distance-based systems negate.
struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
  Protocol protocol = Protocol::OneVsOne;
  std::string system;
};

/// Score of one (enrollment, probe) comparison, keyed like SignaturePair.
struct PairScore {
  std::size_t user = 0;
  int enrollment_slot = 0;
  int probe_slot = 0;
  int label = 0;
  double score = 0.0;
};

inline ScoreSet one_vs_one(std::span<const PairScore> scores, std::string system = {}) {
  ScoreSet out;
  out.protocol = Protocol::OneVsOne;
  out.system = std::move(system);
  for (const auto& s : scores) (s.label == 1 ? out.genuine : out.impostor).push_back(s.score);
  return out;
}

/// Mean over the enrollment signatures of each (user, label, probe). Every
/// probe must have exactly `enrollments` scores, one per slot.
inline ScoreSet aggregate_4vs1(std::span<const PairScore> scores, int enrollments = 4, std::string system = {}) {
  if (enrollments <= 0) throw ProtocolError("enrollment count must be positive");
  using Key = std::tuple<std::size_t, int, int>;  // user, label (genuine first), probe
  std::map<Key, std::vector<const PairScore*>> groups;
  for (const auto& s : scores) groups[{s.user, -s.label, s.probe_slot}].push_back(&s);

  ScoreSet out;
  out.protocol = Protocol::FourVsOne;
  out.system = std::move(system);
  for (const auto& [key, members] : groups) {
    const auto& [user, neg_label, probe] = key;
    std::vector<char> seen(static_cast<std::size_t>(enrollments), 0);
    double sum = 0.0;
    for (const auto* s : members) {
      if (s->enrollment_slot < 0 || s->enrollment_slot >= enrollments || seen[static_cast<std::size_t>(s->enrollment_slot)]) {
        throw ProtocolError("user " + std::to_string(user) + " probe " + std::to_string(probe) +
                            ": unexpected or duplicate enrollment slot " + std::to_string(s->enrollment_slot));
      }
      seen[static_cast<std::size_t>(s->enrollment_slot)] = 1;
      sum += s->score;
    }
    for (int e = 0; e < enrollments; ++e) {
      if (!seen[static_cast<std::size_t>(e)]) {
        throw ProtocolError("user " + std::to_string(user) + " " + (neg_label == -1 ? "genuine" : "impostor") +
                            " probe " + std::to_string(probe) + " is missing the score for enrollment slot " +
                            std::to_string(e) + " (" + std::to_string(members.size()) + " of " +
                            std::to_string(enrollments) + " present)");
      }
    }
    (neg_label == -1 ? out.genuine : out.impostor).push_back(sum / static_cast<double>(enrollments));
  }
  return out;
}

/// Operating point at a threshold: impostors with score >= threshold are
/// false accepts, genuine scores < threshold are false rejects.
struct DetPoint {
  double far = 0.0;
  double frr = 0.0;
  double threshold = 0.0;
};

namespace detail {

struct Sweep {
  std::vector<double> thresholds;  // distinct scores, ascending; the last point sits above every score
  std::vector<std::int64_t> false_accepts;
  std::vector<std::int64_t> false_rejects;
  std::int64_t n_genuine = 0;
  std::int64_t n_impostor = 0;
};

inline Sweep sweep(const ScoreSet& s) {
  if (s.genuine.empty() || s.impostor.empty()) {
    throw Error("EER needs both genuine and impostor scores");
  }
  std::vector<double> gen = s.genuine;
  std::vector<double> imp = s.impostor;
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  Sweep out;
  out.n_genuine = static_cast<std::int64_t>(gen.size());
  out.n_impostor = static_cast<std::int64_t>(imp.size());
  std::vector<double> all;
  all.reserve(gen.size() + imp.size());
  std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(all));
  all.erase(std::unique(all.begin(), all.end()), all.end());
  for (double t : all) {
    out.thresholds.push_back(t);
    out.false_accepts.push_back(imp.end() - std::lower_bound(imp.begin(), imp.end(), t));
    out.false_rejects.push_back(std::lower_bound(gen.begin(), gen.end(), t) - gen.begin());
  }
  out.thresholds.push_back(all.back());
  out.false_accepts.push_back(0);
  out.false_rejects.push_back(out.n_genuine);
  return out;
}

}  // namespace detail

struct EerResult {
  double eer_percent = 0.0;
  double threshold = 0.0;
};

/// Equal error rate over all distinct-score thresholds. Between the last
/// point with FAR >= FRR and the first with FAR < FRR the crossing is
/// interpolated linearly; the arithmetic runs on integer counts so symmetric
/// cases (e.g. identical score sets) come out exact.
inline EerResult compute_eer(const ScoreSet& s) {
  const auto sw = detail::sweep(s);
  const std::int64_t ng = sw.n_genuine;
  const std::int64_t ni = sw.n_impostor;
  // Proportional to FAR - FRR; non-increasing along the sweep.
  auto gap = [&](std::size_t j) -> __int128 {
    return static_cast<__int128>(sw.false_accepts[j]) * ng - static_cast<__int128>(sw.false_rejects[j]) * ni;
  };
  std::size_t k = 0;
  while (gap(k) >= 0) ++k;  // the final point always has a negative gap
  const std::size_t j = k - 1;
  const __int128 dj = gap(j);
  const __int128 dk = gap(k);
  EerResult r;
  if (dj == 0) {
    r.eer_percent = 100.0 * static_cast<double>(sw.false_accepts[j]) / static_cast<double>(ni);
    r.threshold = sw.thresholds[j];
    return r;
  }
  const __int128 num = static_cast<__int128>(sw.false_accepts[j]) * (-dk) + static_cast<__int128>(sw.false_accepts[k]) * dj;
  const __int128 den = static_cast<__int128>(ni) * (dj - dk);
  r.eer_percent = 100.0 * static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
  const double lambda = static_cast<double>(static_cast<long double>(dj) / static_cast<long double>(dj - dk));
  r.threshold = sw.thresholds[j] + lambda * (sw.thresholds[k] - sw.thresholds[j]);
  return r;
}

/// (FAR, FRR) at every distinct threshold plus the point above all scores.
/// FAR is non-increasing and FRR non-decreasing along the list. With
/// 0 < n_points < size, an evenly spaced subset keeping both ends is returned.
inline std::vector<DetPoint> det_curve(const ScoreSet& s, std::size_t n_points = 0) {
  const auto sw = detail::sweep(s);
  std::vector<DetPoint> all;
  all.reserve(sw.thresholds.size());
  for (std::size_t j = 0; j < sw.thresholds.size(); ++j) {
    all.push_back({static_cast<double>(sw.false_accepts[j]) / static_cast<double>(sw.n_impostor),
                   static_cast<double>(sw.false_rejects[j]) / static_cast<double>(sw.n_genuine), sw.thresholds[j]});
  }
  if (n_points == 0 || n_points >= all.size()) return all;
  if (n_points == 1) return {all.front()};
  std::vector<DetPoint> out;
  for (std::size_t k = 0; k < n_points; ++k) {
    out.push_back(all[k * (all.size() - 1) / (n_points - 1)]);
  }
  return out;
}

/// Published evaluation EERs (%), kept for side-by-side reporting only.
struct ReferenceEer {
  std::string_view system;
  Protocol protocol;
  double eer_percent;
};
inline constexpr ReferenceEer kReferenceEers[] = {
    {"dtw", Protocol::OneVsOne, 10.17},
    {"dtw", Protocol::FourVsOne, 7.75},
    {"lstm", Protocol::OneVsOne, 6.44},
    {"lstm", Protocol::FourVsOne, 5.58},
};

struct ResultRow {
  std::string system;
  Protocol protocol = Protocol::OneVsOne;
  EerResult eer;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
};

inline ResultRow summarize(const ScoreSet& s) {
  return {s.system, s.protocol, compute_eer(s), s.genuine.size(), s.impostor.size()};
}

inline void write_results_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out << "system,protocol,eer_percent,threshold,n_genuine,n_impostor\n";
  const auto old = out.precision(10);
  for (const auto& r : rows) {
    out << r.system << ',' << protocol_name(r.protocol) << ',' << r.eer.eer_percent << ',' << r.eer.threshold << ','
        << r.n_genuine << ',' << r.n_impostor << '\n';
  }
  out.precision(old);
}

inline void write_det_csv(std::ostream& out, const ScoreSet& s, std::span<const DetPoint> points, bool header = true) {
  if (header) out << "system,protocol,far,frr\n";
  const auto old = out.precision(10);
  for (const auto& p : points) out << s.system << ',' << protocol_name(s.protocol) << ',' << p.far << ',' << p.frr << '\n';
  out.precision(old);
}

}  // namespace sigver
