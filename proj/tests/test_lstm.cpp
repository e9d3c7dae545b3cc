#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace sigver;

namespace {

LstmParams random_params(std::mt19937_64& rng, Index H, Index D, double scale = 1.0) {
  LstmParams p(H, D);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (Index j = 0; j < p.weights.cols(); ++j)
    for (Index i = 0; i < p.weights.rows(); ++i) p.weights(i, j) = u(rng);
  for (Index i = 0; i < p.bias.size(); ++i) p.bias[i] = u(rng);
  return p;
}

std::vector<double> as_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

double weighted_sum(const SeqMatrix& h, const SeqMatrix& g) { return (h.array() * g.array()).sum(); }

}  // namespace

TEST(LstmStep, AllZero) {
  LstmParams p(4, 3);
  const auto s = lstm_step(p, LstmState::zero(4), Vector::Constant(3, 0.7));
  EXPECT_TRUE(s.h.isZero(0.0));
  EXPECT_TRUE(s.c.isZero(0.0));
}

TEST(LstmStep, ForgetGateSaturation) {
  LstmParams p(1, 1);
  p.gate_bias(Gate::Forget)[0] = 10.0;
  LstmState s{Vector::Zero(1), Vector::Constant(1, 3.0)};
  const auto next = lstm_step(p, s, Vector::Constant(1, -2.0));
  const double c = 3.0 / (1.0 + std::exp(-10.0));
  EXPECT_NEAR(next.c[0], c, 1e-15);
  EXPECT_NEAR(next.c[0], 2.99986, 1e-5);
  EXPECT_NEAR(next.h[0], 0.5 * std::tanh(c), 1e-15);
}

TEST(LstmStep, MatchesScalarReference) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const Index H = 1 + static_cast<Index>(rng() % 6), D = 1 + static_cast<Index>(rng() % 6);
    const auto p = random_params(rng, H, D, 1.5);
    LstmState s{Vector::NullaryExpr(H, [&] { return n(rng); }), Vector::NullaryExpr(H, [&] { return 2 * n(rng); })};
    const Vector x = Vector::NullaryExpr(D, [&] { return n(rng); });
    const auto got = lstm_step(p, s, x);
    const auto want = oracle::lstm_step(p, {as_std(s.h), as_std(s.c)}, as_std(x));
    for (Index j = 0; j < H; ++j) {
      EXPECT_NEAR(got.h[j], want.h[static_cast<std::size_t>(j)], 1e-12);
      EXPECT_NEAR(got.c[j], want.c[static_cast<std::size_t>(j)], 1e-12);
      EXPECT_LT(std::abs(got.h[j]), 1.0);
    }
  }
}

TEST(LstmStep, ShapeErrors) {
  LstmParams p(2, 3);
  EXPECT_THROW(lstm_step(p, LstmState::zero(2), Vector::Zero(2)), ShapeError);
  EXPECT_THROW(lstm_step(p, LstmState::zero(3), Vector::Zero(3)), ShapeError);
}

TEST(LstmForward, SingleStepAndMask) {
  std::mt19937_64 rng(2);
  const auto p = random_params(rng, 3, 2);
  SeqMatrix x = SeqMatrix::Random(1, 2);
  const auto tr = lstm_forward(p, x);
  const auto s = lstm_step(p, LstmState::zero(3), x.row(0).transpose());
  EXPECT_TRUE(tr.hidden.row(0).transpose().isApprox(s.h, 1e-14));

  const auto none = lstm_forward(p, SeqMatrix::Random(4, 2), std::vector<char>(4, 0));
  EXPECT_TRUE(none.hidden.isZero(0.0));
  EXPECT_TRUE(none.final_state.c.isZero(0.0));
}

TEST(LstmForward, GatesInRange) {
  std::mt19937_64 rng(3);
  const auto p = random_params(rng, 5, 4, 3.0);
  const auto tr = lstm_forward(p, SeqMatrix::Random(20, 4) * 5.0);
  EXPECT_GT(tr.gates.leftCols(15).minCoeff(), 0.0);
  EXPECT_LT(tr.gates.leftCols(15).maxCoeff(), 1.0);
  // tanh rounds to exactly 1 in double once its argument passes ~19
  EXPECT_LE(tr.gates.rightCols(5).cwiseAbs().maxCoeff(), 1.0);
  EXPECT_LE(tr.hidden.cwiseAbs().maxCoeff(), 1.0);
}

TEST(LstmForward, TrailingPaddingIsExact) {
  std::mt19937_64 rng(4);
  const auto p = random_params(rng, 6, 4);
  const SeqMatrix x = SeqMatrix::Random(5, 4);
  SeqMatrix padded = SeqMatrix::Random(12, 4);
  padded.topRows(5) = x;
  std::vector<char> mask(12, 0);
  std::fill_n(mask.begin(), 5, 1);
  const auto a = lstm_forward(p, x);
  const auto b = lstm_forward(p, padded, mask);
  EXPECT_EQ(a.hidden, b.hidden.topRows(5));
  for (Index t = 5; t < 12; ++t) EXPECT_EQ(b.hidden.row(t), a.hidden.row(4));
  EXPECT_EQ(a.final_state.h, b.final_state.h);
  EXPECT_EQ(a.final_state.c, b.final_state.c);
}

TEST(LstmBackward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const Index H = 5, D = 7, T = 9;
  auto p = random_params(rng, H, D, 0.8);
  SeqMatrix x = SeqMatrix::Random(T, D);
  std::vector<char> mask(T, 1);
  mask[3] = 0;  // a masked step in the middle
  const SeqMatrix g = SeqMatrix::Random(T, H);
  const auto back = lstm_backward(p, lstm_forward(p, x, mask), g);
  const double step = 1e-5;

  auto check = [&](auto& values, const auto& analytic) {
    std::vector<double> a, num;
    for (Index j = 0; j < values.cols(); ++j)
      for (Index i = 0; i < values.rows(); ++i) {
        const double saved = values(i, j);
        values(i, j) = saved + step;
        const double up = weighted_sum(lstm_forward(p, x, mask).hidden, g);
        values(i, j) = saved - step;
        const double down = weighted_sum(lstm_forward(p, x, mask).hidden, g);
        values(i, j) = saved;
        num.push_back((up - down) / (2 * step));
        a.push_back(analytic(i, j));
      }
    return oracle::relative_error(a, num);
  };
  EXPECT_LE(check(p.weights, back.params.weights), 1e-4);
  EXPECT_LE(check(p.bias, back.params.bias), 1e-4);
  EXPECT_LE(check(x, back.inputs), 1e-4);
  EXPECT_TRUE(back.inputs.row(3).isZero(0.0));
}

TEST(LstmBackward, ZeroUpstream) {
  std::mt19937_64 rng(6);
  const auto p = random_params(rng, 3, 2);
  const auto tr = lstm_forward(p, SeqMatrix::Random(6, 2));
  const auto back = lstm_backward(p, tr, SeqMatrix::Zero(6, 3));
  EXPECT_TRUE(back.params.weights.isZero(0.0));
  EXPECT_TRUE(back.params.bias.isZero(0.0));
  EXPECT_TRUE(back.inputs.isZero(0.0));
  EXPECT_THROW(lstm_backward(p, tr, SeqMatrix::Zero(5, 3)), ShapeError);
}

TEST(Dense, Sigmoid) {
  DenseParams d{Vector::Zero(3), 0.0};
  EXPECT_EQ(dense_sigmoid(d, Vector::Random(3)), 0.5);
  d.bias = 20.0;
  EXPECT_NEAR(dense_sigmoid(d, Vector::Zero(3)), 1.0, 1e-8);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  d.weights = Vector::NullaryExpr(4, [&] { return n(rng); });
  d.bias = n(rng);
  const Vector x = Vector::NullaryExpr(4, [&] { return n(rng); });
  double z = d.bias;
  for (Index i = 0; i < 4; ++i) z += d.weights[i] * x[i];
  EXPECT_NEAR(dense_sigmoid(d, x), 1.0 / (1.0 + std::exp(-z)), 1e-12);
  EXPECT_THROW(dense_sigmoid(d, Vector::Zero(3)), ShapeError);
}
