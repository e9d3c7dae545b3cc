#pragma once

// Small pipelines shared by the unit tests and the acceptance runner.

#include "sigver/sigver.hpp"

#include <vector>

namespace fixture {

struct Prepared {
  sigver::DatasetSplit split;
  std::vector<sigver::FeatureSequence> features;  // parallel to split.records
};

inline Prepared prepare(const std::vector<sigver::SignatureRecord>& records, std::size_t n_dev, unsigned workers = 1) {
  Prepared p;
  p.split = sigver::build_split(records, n_dev);
  p.features.resize(p.split.records.size());
  sigver::parallel_for(p.features.size(), workers,
                       [&](std::size_t i) { p.features[i] = sigver::extract_features(p.split.records[i]); });
  return p;
}

struct Eers {
  double one_vs_one = 0.0;
  double four_vs_one = 0.0;
};

inline Eers eers(const std::vector<sigver::PairScore>& scores) {
  return {sigver::compute_eer(sigver::one_vs_one(scores)).eer_percent,
          sigver::compute_eer(sigver::aggregate_4vs1(scores)).eer_percent};
}

/// DTW over all 23 time functions.
inline Eers dtw_eers(const Prepared& p, sigver::Partition part, unsigned workers = 1) {
  const auto pairs = sigver::build_pairs(p.split, part);
  return eers(sigver::dtw_scores(pairs, p.features, sigver::all_columns(), workers));
}

inline Eers lstm_eers(const sigver::SiameseModel& m, const Prepared& p, sigver::Partition part, unsigned workers = 1) {
  const auto pairs = sigver::build_pairs(p.split, part);
  const auto scores = sigver::score_pairs(m, sigver::labeled_pairs(pairs, p.features), workers);
  std::vector<sigver::PairScore> out(pairs.pairs.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& q = pairs.pairs[k];
    out[k] = {q.user, q.enrollment_slot, q.probe_slot, q.label, scores[k]};
  }
  return eers(out);
}

}  // namespace fixture
