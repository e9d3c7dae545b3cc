#include "sigver/features.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace sigver;

namespace {

SignatureRecord from_points(const std::vector<std::array<double, 3>>& pts, bool pressure = true, int dt = 10) {
  SignatureRecord r;
  r.user_id = "u";
  r.has_pressure = pressure;
  for (std::size_t n = 0; n < pts.size(); ++n) {
    PenSample s;
    s.x = std::llround(pts[n][0]);
    s.y = std::llround(pts[n][1]);
    s.pressure = pressure ? static_cast<int>(pts[n][2]) : kDefaultPressure;
    s.timestamp = static_cast<std::int64_t>(n) * dt;
    r.samples.push_back(s);
  }
  return r;
}

SignatureRecord wiggle(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> step(0.0, 6.0);
  std::uniform_int_distribution<int> p(100, 900);
  std::vector<std::array<double, 3>> pts;
  double x = 1000, y = 1000;
  for (int i = 0; i < n; ++i) {
    x += 5 + step(rng);
    y += step(rng);
    pts.push_back({x, y, static_cast<double>(p(rng))});
  }
  return from_points(pts);
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double d : v) out[i++] = d;
  return out;
}

}  // namespace

TEST(Derivative, Constant) {
  EXPECT_TRUE(derivative(vec({5, 5, 5, 5, 5, 5})).isZero(0.0));
}

TEST(Derivative, LinearRampIsExact) {
  Vector s(10);
  for (Index n = 0; n < 10; ++n) s[n] = 2.0 * static_cast<double>(n);
  const Vector d = derivative(s);
  for (Index n = 0; n < 10; ++n) EXPECT_DOUBLE_EQ(d[n], 2.0);
}

TEST(Derivative, QuadraticByHand) {
  // d_2 = (9 - 1 + 2*(16 - 0))/10, d_3 = (16 - 4 + 2*(25 - 1))/10, d_4 = (25 - 9 + 2*(36 - 4))/10
  const Vector d = derivative(vec({0, 1, 4, 9, 16, 25, 36}));
  const Vector expected = vec({4, 4, 4, 6, 8, 8, 8});
  for (Index n = 0; n < 7; ++n) EXPECT_DOUBLE_EQ(d[n], expected[n]) << n;
}

TEST(Derivative, ShortFallbackAndError) {
  const Vector d = derivative(vec({1, 4, 9}));
  EXPECT_DOUBLE_EQ(d[0], 3.0);
  EXPECT_DOUBLE_EQ(d[1], 4.0);
  EXPECT_DOUBLE_EQ(d[2], 5.0);
  EXPECT_THROW(derivative(vec({1})), Error);
}

TEST(Features, HorizontalLine) {
  std::vector<std::array<double, 3>> pts;
  for (int n = 0; n < 20; ++n) pts.push_back({100.0 + 10.0 * n, 50.0, 300.0});
  ExtractOptions raw;
  raw.normalize = false;
  const auto f = extract_features(from_points(pts), raw);
  ASSERT_EQ(f.cols(), 23);
  for (Index n = 0; n < f.steps; ++n) {
    EXPECT_DOUBLE_EQ(f.values(n, 3), 0.0);
    EXPECT_DOUBLE_EQ(f.values(n, 4), 10.0);
    EXPECT_DOUBLE_EQ(f.values(n, 19), 0.0);
    EXPECT_DOUBLE_EQ(f.values(n, 20), 1.0);
  }
}

TEST(Features, CircleKinematics) {
  // x = r cos(w n), y = r sin(w n): speed r*w and curvature radius r.
  const double r = 5000.0, w = 0.05;
  std::vector<std::array<double, 3>> pts;
  for (int n = 0; n < 60; ++n) pts.push_back({r * std::cos(w * n), r * std::sin(w * n), 400.0});
  ExtractOptions raw;
  raw.normalize = false;
  const auto f = extract_features(from_points(pts), raw);
  for (Index n = 4; n < f.steps - 4; ++n) {
    EXPECT_NEAR(f.values(n, 4), r * w, 0.02 * r * w) << n;
    EXPECT_NEAR(f.values(n, 5), std::log(r), 0.02 * std::log(r)) << n;
  }
}

TEST(Features, TranslationInvariance) {
  std::mt19937_64 rng(3);
  const auto a = wiggle(rng, 80);
  auto b = a;
  for (auto& s : b.samples) {
    s.x += 777;
    s.y -= 4321;
  }
  ExtractOptions raw;
  raw.normalize = false;
  const auto fa = extract_features(a, raw), fb = extract_features(b, raw);
  EXPECT_TRUE(fa.values.rightCols(20).isApprox(fb.values.rightCols(20), 1e-12));
  const auto na = extract_features(a), nb = extract_features(b);
  EXPECT_LE((na.values - nb.values).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Features, NormalizationAndRanges) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 5; ++k) {
    const auto rec = wiggle(rng, 50 + 30 * k);
    const auto f = extract_features(rec);
    ASSERT_TRUE(f.values.allFinite());
    for (Index c = 0; c < 23; ++c) {
      const auto col = f.values.col(c);
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().mean());
      EXPECT_NEAR(mean, 0.0, 1e-6) << c;
      if (!col.isZero(0.0)) EXPECT_NEAR(sd, 1.0, 1e-6) << c;
    }
    ExtractOptions raw;
    raw.normalize = false;
    const auto r = extract_features(rec, raw);
    EXPECT_GE(r.values.col(16).minCoeff(), 0.0);
    EXPECT_LE(r.values.col(16).maxCoeff(), 1.0);
    EXPECT_EQ(extract_features(rec).values, f.values);
  }
}

TEST(Features, PressureFreeColumnsVanish) {
  std::mt19937_64 rng(5);
  auto rec = wiggle(rng, 40);
  rec.has_pressure = false;
  for (auto& s : rec.samples) s.pressure = kDefaultPressure;
  const auto f = extract_features(rec);
  EXPECT_TRUE(f.values.col(2).isZero(0.0));
  EXPECT_TRUE(f.values.col(9).isZero(0.0));
}

TEST(Features, TooShort) {
  std::mt19937_64 rng(6);
  EXPECT_THROW(extract_features(wiggle(rng, 6)), Error);
  EXPECT_NO_THROW(extract_features(wiggle(rng, 7)));
}

TEST(Features, TimestampAware) {
  std::mt19937_64 rng(7);
  const auto a = wiggle(rng, 30);
  ExtractOptions raw;
  raw.normalize = false;
  ExtractOptions ts = raw;
  ts.timestamp_aware = true;
  // Uniform 100 Hz timestamps: identical to the index-based derivative.
  EXPECT_TRUE(extract_features(a, raw).values.isApprox(extract_features(a, ts).values, 1e-12));
  auto slow = a;
  for (auto& s : slow.samples) s.timestamp *= 2;
  const auto fs = extract_features(slow, ts);
  const auto fa = extract_features(a, raw);
  EXPECT_NEAR(fs.values(10, 4), 0.5 * fa.values(10, 4), 1e-9);
}

TEST(Features, PaddingAndCsv) {
  std::mt19937_64 rng(8);
  const auto f = extract_features(wiggle(rng, 12));
  const auto p = with_padding(f, 5);
  EXPECT_EQ(p.rows(), 17);
  EXPECT_EQ(p.steps, 12);
  EXPECT_EQ(p.values.topRows(12), f.values);
  std::ostringstream out;
  write_feature_csv(out, p);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 13);
  EXPECT_EQ(text.substr(0, 8), "1:x,2:y,");
}
