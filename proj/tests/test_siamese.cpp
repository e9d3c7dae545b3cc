#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace sigver;

namespace {

SiameseConfig small_config(Index d, Index hb, Index hm) {
  SiameseConfig c;
  c.input_size = d;
  c.branch_hidden = hb;
  c.merge_hidden = hm;
  return c;
}

}  // namespace

TEST(Siamese, ZeroModelScoresOneHalf) {
  std::mt19937_64 rng(1);
  const auto m = zero_model();
  const auto a = oracle::random_sequence(rng, 30, 23);
  const auto b = oracle::random_sequence(rng, 41, 23);
  EXPECT_EQ(score_pair(m, a, b), 0.5);
}

TEST(Siamese, MatchesScalarReference) {
  std::mt19937_64 rng(2);
  for (int concat = 0; concat < 2; ++concat)
    for (int readout = 0; readout < 2; ++readout)
      for (int sym = 0; sym < 2; ++sym) {
        auto cfg = small_config(5, 4, 3);
        cfg.concatenation = static_cast<Concatenation>(concat);
        cfg.readout = static_cast<Readout>(readout);
        cfg.symmetrize = sym == 1;
        const auto m = oracle::random_model(rng, cfg, 0.8);
        const auto a = oracle::random_sequence(rng, 6, 5, 3);
        const auto b = oracle::random_sequence(rng, 9, 5);
        EXPECT_NEAR(score_pair(m, a, b), oracle::siamese_score(m, a, b), 1e-12)
            << concat << readout << sym;
      }
}

TEST(Siamese, SymmetrizedScoreIsOrderFree) {
  std::mt19937_64 rng(3);
  const auto m = oracle::random_model(rng, small_config(6, 5, 4), 0.7);
  const auto a = oracle::random_sequence(rng, 7, 6);
  const auto b = oracle::random_sequence(rng, 12, 6);
  EXPECT_EQ(score_pair(m, a, b), score_pair(m, b, a));
}

TEST(Siamese, PaddingDoesNotChangeScores) {
  std::mt19937_64 rng(4);
  const auto m = oracle::random_model(rng, small_config(23, 8, 5), 0.5);
  for (int k = 0; k < 10; ++k) {
    const auto a = oracle::random_sequence(rng, 10 + k, 23);
    const auto b = oracle::random_sequence(rng, 15, 23);
    FeatureSequence ap = with_padding(a, 7);
    ap.values.bottomRows(7).setConstant(3.0);
    EXPECT_EQ(score_pair(m, a, b), score_pair(m, ap, b));
    EXPECT_EQ(encode(m, a).hidden, encode(m, ap).hidden.topRows(a.steps));
  }
}

TEST(Siamese, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int concat = 0; concat < 2; ++concat)
    for (int readout = 0; readout < 2; ++readout) {
      auto cfg = small_config(4, 3, 2);
      cfg.concatenation = static_cast<Concatenation>(concat);
      cfg.readout = static_cast<Readout>(readout);
      const auto m = oracle::random_model(rng, cfg, 0.9);
      const auto a = oracle::random_sequence(rng, 5, 4, 2);
      const auto b = oracle::random_sequence(rng, 7, 4);
      const auto c = oracle::random_sequence(rng, 3, 4);
      // `a` occurs in two pairs, on both sides, so gradient routing through
      // shared encodings is exercised.
      const std::vector<LabeledPair> pairs{{&a, &b, 1}, {&c, &a, 0}, {&b, &c, 1}};
      const auto check = oracle::gradient_check(m, pairs);
      EXPECT_LE(check.worst, 1e-6) << check.worst_tensor << " concat " << concat << " readout " << readout;
    }
}

TEST(Siamese, BatchGradientIndependentOfWorkers) {
  std::mt19937_64 rng(6);
  const auto m = oracle::random_model(rng, small_config(5, 4, 3), 0.5);
  std::vector<FeatureSequence> seqs;
  for (int k = 0; k < 8; ++k) seqs.push_back(oracle::random_sequence(rng, 5 + k, 5));
  std::vector<LabeledPair> pairs;
  for (int k = 0; k < 8; ++k) pairs.push_back({&seqs[static_cast<std::size_t>(k)], &seqs[static_cast<std::size_t>((k * 3 + 1) % 8)], k % 2});
  const auto one = batch_gradient(m, pairs, 1);
  const auto four = batch_gradient(m, pairs, 4);
  EXPECT_EQ(one.scores, four.scores);
  EXPECT_TRUE(one.grads == four.grads);
  EXPECT_EQ(score_pairs(m, pairs, 1), score_pairs(m, pairs, 3, 3));
}

TEST(Siamese, PairLoss) {
  EXPECT_NEAR(pair_loss(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(pair_loss(0.5, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(pair_loss(0.9, 1), -std::log(0.9), 1e-15);
  EXPECT_NEAR(pair_loss(0.9, 0), -std::log(0.1), 1e-12);
  EXPECT_NEAR(pair_loss(0.0, 1), -std::log(kScoreClamp), 1e-9);
  EXPECT_TRUE(std::isfinite(pair_loss(1.0, 0)));
  EXPECT_NEAR(pair_loss_derivative(0.25, 1), -4.0, 1e-15);
  EXPECT_NEAR(pair_loss_derivative(0.75, 0), 4.0, 1e-12);
}

TEST(Siamese, RejectsWrongWidth) {
  std::mt19937_64 rng(7);
  const auto m = zero_model();
  const auto a = oracle::random_sequence(rng, 10, 22);
  const auto b = oracle::random_sequence(rng, 10, 23);
  EXPECT_THROW(score_pair(m, a, b), ShapeError);
}

TEST(ModelFile, RoundTrip) {
  std::mt19937_64 rng(8);
  auto cfg = small_config(23, 6, 4);
  cfg.readout = Readout::MeanOverTime;
  cfg.symmetrize = false;
  const auto m = oracle::random_model(rng, cfg, 1.0);
  std::stringstream buf;
  save_model(m, buf);
  const auto back = load_model(buf);
  EXPECT_TRUE(back == m);
}

TEST(ModelFile, RejectsCorruptInput) {
  std::stringstream bad("NOTAMODEL and some bytes");
  EXPECT_THROW(load_model(bad), FormatError);
  std::stringstream full;
  save_model(initialize_model({}, 3), full);
  const std::string bytes = full.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_model(truncated), FormatError);
  std::string wrong_version = bytes;
  wrong_version[8] = 9;
  std::stringstream v(wrong_version);
  EXPECT_THROW(load_model(v), FormatError);
}

TEST(Initialization, BoundsAndForgetBias) {
  const auto m = initialize_model({}, 11);
  const double rb = 1.0 / std::sqrt(46.0 + 23.0);
  EXPECT_LE(m.params.branch.weights.cwiseAbs().maxCoeff(), rb);
  EXPECT_GT(m.params.branch.weights.cwiseAbs().maxCoeff(), 0.9 * rb);
  EXPECT_TRUE((m.params.branch.gate_bias(Gate::Forget).array() == 1.0).all());
  EXPECT_TRUE((m.params.branch.gate_bias(Gate::Input).array() == 0.0).all());
  EXPECT_TRUE(initialize_model({}, 11) == m);
  EXPECT_FALSE(initialize_model({}, 12) == m);
}
