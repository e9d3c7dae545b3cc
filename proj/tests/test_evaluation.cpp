#include "oracles.hpp"

#include <gtest/gtest.h>

#include <map>
#include <sstream>

using namespace sigver;

namespace {

ScoreSet make(std::vector<double> gen, std::vector<double> imp) {
  ScoreSet s;
  s.genuine = std::move(gen);
  s.impostor = std::move(imp);
  return s;
}

}  // namespace

TEST(Eer, PerfectSeparation) {
  EXPECT_EQ(compute_eer(make({5, 6, 7}, {1, 2, 3, 4})).eer_percent, 0.0);
}

TEST(Eer, IdenticalDistributions) {
  EXPECT_EQ(compute_eer(make({1, 2, 3, 4}, {1, 2, 3, 4})).eer_percent, 50.0);
  EXPECT_EQ(compute_eer(make({0.5}, {0.5})).eer_percent, 50.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<double> v(301);
  for (auto& x : v) x = n(rng);
  EXPECT_EQ(compute_eer(make(v, v)).eer_percent, 50.0);
}

TEST(Eer, FullyInverted) {
  EXPECT_EQ(compute_eer(make({1, 2}, {3, 4})).eer_percent, 100.0);
}

TEST(Eer, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 200; ++k) {
    const std::size_t ng = 1 + rng() % 250, ni = 1 + rng() % 250;
    std::normal_distribution<double> g(1.0, 1.0), i(0.0, 1.0);
    const bool discrete = k % 3 == 0;  // many ties
    auto draw = [&](auto& d) { return discrete ? std::round(d(rng) * 2.0) : d(rng); };
    std::vector<double> gen(ng), imp(ni);
    for (auto& x : gen) x = draw(g);
    for (auto& x : imp) x = draw(i);
    EXPECT_NEAR(compute_eer(make(gen, imp)).eer_percent, oracle::eer_brute(gen, imp), 1e-9) << k;
  }
}

TEST(Eer, NeedsBothClasses) {
  EXPECT_THROW(compute_eer(make({}, {1})), Error);
  EXPECT_THROW(compute_eer(make({1}, {})), Error);
}

TEST(Det, MonotoneAndComplete) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> gen(100), imp(150);
  for (auto& x : gen) x = n(rng) + 1.5;
  for (auto& x : imp) x = n(rng);
  const auto s = make(gen, imp);
  const auto det = det_curve(s);
  EXPECT_EQ(det.size(), 251u);
  EXPECT_EQ(det.front().far, 1.0);
  EXPECT_EQ(det.front().frr, 0.0);
  EXPECT_EQ(det.back().far, 0.0);
  EXPECT_EQ(det.back().frr, 1.0);
  for (std::size_t k = 1; k < det.size(); ++k) {
    EXPECT_LE(det[k].far, det[k - 1].far);
    EXPECT_GE(det[k].frr, det[k - 1].frr);
  }
  const auto few = det_curve(s, 10);
  ASSERT_EQ(few.size(), 10u);
  EXPECT_EQ(few.front().far, 1.0);
  EXPECT_EQ(few.back().frr, 1.0);
}

TEST(Aggregate, MeanOverEnrollments) {
  std::vector<PairScore> scores;
  for (int e = 0; e < 4; ++e) {
    for (int p = 0; p < 3; ++p) {
      scores.push_back({0, e, p, 1, static_cast<double>(e + 10 * p)});
      scores.push_back({0, e, p, 0, -static_cast<double>(e)});
    }
  }
  const auto s = aggregate_4vs1(scores);
  EXPECT_EQ(s.protocol, Protocol::FourVsOne);
  ASSERT_EQ(s.genuine.size(), 3u);
  EXPECT_DOUBLE_EQ(s.genuine[0], 1.5);
  EXPECT_DOUBLE_EQ(s.genuine[2], 21.5);
  ASSERT_EQ(s.impostor.size(), 3u);
  EXPECT_DOUBLE_EQ(s.impostor[1], -1.5);
  const auto one = one_vs_one(scores, "x");
  EXPECT_EQ(one.genuine.size(), 12u);
  EXPECT_EQ(one.system, "x");
}

TEST(Aggregate, MissingEnrollmentIsNamed) {
  std::vector<PairScore> scores;
  for (int e = 0; e < 4; ++e) scores.push_back({2, e, 0, 1, 1.0});
  for (int e = 0; e < 3; ++e) scores.push_back({2, e, 5, 0, 1.0});
  try {
    aggregate_4vs1(scores);
    FAIL();
  } catch (const ProtocolError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("user 2"), std::string::npos);
    EXPECT_NE(what.find("probe 5"), std::string::npos);
    EXPECT_NE(what.find("slot 3"), std::string::npos);
  }
  scores.push_back({2, 1, 5, 0, 1.0});
  EXPECT_THROW(aggregate_4vs1(scores), ProtocolError);
}

TEST(Results, CsvFormats) {
  const auto s = make({2, 3}, {0, 1});
  std::vector<ResultRow> rows{summarize(s)};
  rows[0].system = "lstm";
  std::ostringstream out;
  write_results_csv(out, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "system,protocol,eer_percent,threshold,n_genuine,n_impostor");
  EXPECT_NE(out.str().find("lstm,1vs1,0,"), std::string::npos);
  std::ostringstream det;
  write_det_csv(det, s, det_curve(s));
  const std::string text = det.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 6);
}

TEST(Results, PublishedReferenceValues) {
  std::map<std::pair<std::string, Protocol>, double> ref;
  for (const auto& r : kReferenceEers) ref[{std::string(r.system), r.protocol}] = r.eer_percent;
  EXPECT_EQ(ref.size(), 4u);
  EXPECT_DOUBLE_EQ((ref[{"dtw", Protocol::OneVsOne}]), 10.17);
  EXPECT_DOUBLE_EQ((ref[{"dtw", Protocol::FourVsOne}]), 7.75);
  EXPECT_DOUBLE_EQ((ref[{"lstm", Protocol::OneVsOne}]), 6.44);
  EXPECT_DOUBLE_EQ((ref[{"lstm", Protocol::FourVsOne}]), 5.58);
}
