#pragma once

// LSTM layer without peepholes:
//   f_t  = sigma(W_f [h_{t-1}, x_t] + b_f)
//   i_t  = sigma(W_i [h_{t-1}, x_t] + b_i)
//   o_t  = sigma(W_o [h_{t-1}, x_t] + b_o)
//   C~_t = tanh(W_C [h_{t-1}, x_t] + b_C)
//   C_t  = f_t * C_{t-1} + i_t * C~_t
//   h_t  = o_t * tanh(C_t)
// with forward evaluation over masked sequences and backpropagation through
// time, plus the sigmoid output unit used as the scoring head.

#include "sigver/common.hpp"

#include <vector>

namespace sigver {

enum class Gate : Index { Forget = 0, Input = 1, Output = 2, Candidate = 3 };

/// The four gate matrices stacked row-wise in Gate order. Each block is
/// H x (H + D) and acts on the concatenation [h_{t-1}, x_t], so the first H
/// columns are the recurrent weights and the last D the input weights.
struct LstmParams {
  Index hidden = 0;
  Index input = 0;
  Matrix weights;  // 4H x (H + D)
  Vector bias;     // 4H

  LstmParams() = default;
  LstmParams(Index hidden_size, Index input_size)
      : hidden(hidden_size),
        input(input_size),
        weights(Matrix::Zero(4 * hidden_size, hidden_size + input_size)),
        bias(Vector::Zero(4 * hidden_size)) {}

  auto gate_weights(Gate g) { return weights.middleRows(static_cast<Index>(g) * hidden, hidden); }
  auto gate_weights(Gate g) const { return weights.middleRows(static_cast<Index>(g) * hidden, hidden); }
  auto gate_bias(Gate g) { return bias.segment(static_cast<Index>(g) * hidden, hidden); }
  auto gate_bias(Gate g) const { return bias.segment(static_cast<Index>(g) * hidden, hidden); }
  auto recurrent_weights() const { return weights.leftCols(hidden); }
  auto input_weights() const { return weights.rightCols(input); }

  void check() const {
    require_shape(hidden > 0 && input > 0, "LSTM sizes must be positive");
    require_shape(weights.rows() == 4 * hidden && weights.cols() == hidden + input, "LSTM weight shape mismatch");
    require_shape(bias.size() == 4 * hidden, "LSTM bias shape mismatch");
  }

  bool operator==(const LstmParams& o) const {
    return hidden == o.hidden && input == o.input && weights == o.weights && bias == o.bias;
  }
};

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zero(Index hidden) { return {Vector::Zero(hidden), Vector::Zero(hidden)}; }
};

/// One time step.
inline LstmState lstm_step(const LstmParams& p, const LstmState& state, const Vector& x) {
  p.check();
  require_shape(state.h.size() == p.hidden && state.c.size() == p.hidden, "LSTM state size mismatch");
  require_shape(x.size() == p.input, "LSTM input size mismatch");
  const Index H = p.hidden;
  Vector hx(H + p.input);
  hx << state.h, x;
  const Vector z = p.weights * hx + p.bias;
  const Eigen::ArrayXd f = sigmoid_array(z.segment(0, H).array());
  const Eigen::ArrayXd i = sigmoid_array(z.segment(H, H).array());
  const Eigen::ArrayXd o = sigmoid_array(z.segment(2 * H, H).array());
  const Eigen::ArrayXd g = tanh_array(z.segment(3 * H, H).array());
  LstmState next;
  next.c = (f * state.c.array() + i * g).matrix();
  next.h = (o * tanh_array(next.c.array())).matrix();
  return next;
}

/// Everything the backward pass needs. Row t of `hidden` is the layer output
/// at step t; masked steps carry the previous state forward unchanged.
struct LstmTrace {
  SeqMatrix inputs;         // T x D
  std::vector<char> mask;   // T, nonzero = valid step
  SeqMatrix gates;          // T x 4H activated [f, i, o, C~]; zero on masked rows
  SeqMatrix cells;          // T x H, C_t
  SeqMatrix hidden;         // T x H, h_t
  LstmState final_state;

  Index steps() const { return hidden.rows(); }
};

namespace detail {

/// Recurrence from the zero state. `preactivation(k, z)` must write
/// W_x x + b for the k-th valid step into z (size 4H).
template <class Preactivation>
LstmTrace lstm_scan(const LstmParams& p, std::vector<char> mask, Preactivation&& preactivation) {
  const Index T = static_cast<Index>(mask.size());
  const Index H = p.hidden;
  LstmTrace tr;
  tr.mask = std::move(mask);
  tr.gates = SeqMatrix::Zero(T, 4 * H);
  tr.cells.resize(T, H);
  tr.hidden.resize(T, H);

  const auto recurrent = p.recurrent_weights();
  Vector h = Vector::Zero(H);
  Vector c = Vector::Zero(H);
  Vector z(4 * H);
  Index k = 0;
  for (Index t = 0; t < T; ++t) {
    if (tr.mask[static_cast<std::size_t>(t)]) {
      preactivation(k++, z);
      z.noalias() += recurrent * h;
      auto gates = tr.gates.row(t).array();
      gates.head(3 * H) = sigmoid_array(z.head(3 * H).array()).transpose();
      gates.tail(H) = tanh_array(z.tail(H).array()).transpose();
      c.array() = gates.head(H).transpose() * c.array() + gates.segment(H, H).transpose() * gates.tail(H).transpose();
      h.array() = gates.segment(2 * H, H).transpose() * tanh_array(c.array());
    }
    tr.cells.row(t) = c.transpose();
    tr.hidden.row(t) = h.transpose();
  }
  tr.final_state = {h, c};
  return tr;
}

}  // namespace detail

/// Runs the layer from the zero state. The input projection is evaluated only
/// for valid rows, so trailing padding never changes any valid output bit.
inline LstmTrace lstm_forward(const LstmParams& p, const SeqMatrix& inputs, std::vector<char> mask) {
  p.check();
  const Index T = inputs.rows();
  require_shape(T >= 1, "LSTM forward needs at least one step");
  require_shape(inputs.cols() == p.input, "LSTM input width mismatch");
  require_shape(static_cast<Index>(mask.size()) == T, "LSTM mask length mismatch");

  std::vector<Index> valid;
  valid.reserve(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) {
    if (mask[static_cast<std::size_t>(t)]) valid.push_back(t);
  }
  SeqMatrix projected(static_cast<Index>(valid.size()), 4 * p.hidden);
  if (!valid.empty()) {
    SeqMatrix compact(static_cast<Index>(valid.size()), p.input);
    for (std::size_t k = 0; k < valid.size(); ++k) compact.row(static_cast<Index>(k)) = inputs.row(valid[k]);
    projected.noalias() = compact * p.input_weights().transpose();
    projected.rowwise() += p.bias.transpose();
  }
  LstmTrace tr = detail::lstm_scan(p, std::move(mask), [&](Index k, Vector& z) { z = projected.row(k).transpose(); });
  tr.inputs = inputs;
  return tr;
}

inline LstmTrace lstm_forward(const LstmParams& p, const SeqMatrix& inputs) {
  return lstm_forward(p, inputs, std::vector<char>(static_cast<std::size_t>(inputs.rows()), 1));
}

struct LstmGrads {
  Matrix weights;
  Vector bias;

  static LstmGrads zero_like(const LstmParams& p) {
    return {Matrix::Zero(p.weights.rows(), p.weights.cols()), Vector::Zero(p.bias.size())};
  }
  LstmGrads& operator+=(const LstmGrads& o) {
    weights += o.weights;
    bias += o.bias;
    return *this;
  }
};

/// Pre-activation gradients of a backward pass. The input-weight gradient is
/// dz^T X and the input gradient dz W_x; both are left to the caller.
struct LstmDeltas {
  SeqMatrix dz;      // T x 4H; zero on masked rows
  Matrix recurrent;  // 4H x H
  Vector bias;       // 4H
};

/// Backpropagation through time of sum_t <grad_h_t, h_t>.
inline LstmDeltas lstm_deltas(const LstmParams& p, const LstmTrace& tr, const SeqMatrix& grad_h) {
  const Index T = tr.steps();
  const Index H = p.hidden;
  require_shape(tr.gates.cols() == 4 * H, "LSTM trace does not match parameters");
  require_shape(grad_h.rows() == T && grad_h.cols() == H, "LSTM output-gradient shape mismatch");

  LstmDeltas out;
  out.dz = SeqMatrix::Zero(T, 4 * H);
  const auto recurrent = p.recurrent_weights();
  const SeqMatrix tanh_cells = tanh_array(tr.cells.array()).matrix();
  const Eigen::RowVectorXd zero = Eigen::RowVectorXd::Zero(H);
  Vector dh_next = Vector::Zero(H);
  Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(H);
  Eigen::RowVectorXd dh(H), dc(H);
  for (Index t = T - 1; t >= 0; --t) {
    dh = grad_h.row(t) + dh_next.transpose();
    if (!tr.mask[static_cast<std::size_t>(t)]) {
      dh_next = dh.transpose();  // state copied through: gradient passes to the previous step
      continue;
    }
    const auto g = tr.gates.row(t).array();
    const auto f = g.head(H);
    const auto i = g.segment(H, H);
    const auto o = g.segment(2 * H, H);
    const auto cand = g.tail(H);
    const auto c_prev = Eigen::Map<const Eigen::RowVectorXd>(t > 0 ? &tr.cells(t - 1, 0) : zero.data(), H).array();
    const auto tanh_c = tanh_cells.row(t).array();

    dc.array() = dc_next.array() + dh.array() * o * (1.0 - tanh_c.square());
    auto row = out.dz.row(t).array();
    row.head(H) = dc.array() * c_prev * f * (1.0 - f);
    row.segment(H, H) = dc.array() * cand * i * (1.0 - i);
    row.segment(2 * H, H) = dh.array() * tanh_c * o * (1.0 - o);
    row.tail(H) = dc.array() * i * (1.0 - cand.square());

    dc_next.array() = dc.array() * f;
    dh_next.noalias() = recurrent.transpose() * out.dz.row(t).transpose();
  }

  SeqMatrix h_prev = SeqMatrix::Zero(T, H);
  if (T > 1) h_prev.bottomRows(T - 1) = tr.hidden.topRows(T - 1);
  out.recurrent.noalias() = out.dz.transpose() * h_prev;
  out.bias = out.dz.colwise().sum().transpose();
  return out;
}

struct LstmBackward {
  LstmGrads params;
  SeqMatrix inputs;  // T x D gradient w.r.t. the inputs; zero on masked rows
};

/// Exact gradients of sum_t <grad_h_t, h_t> for the trace's forward pass.
inline LstmBackward lstm_backward(const LstmParams& p, const LstmTrace& tr, const SeqMatrix& grad_h) {
  p.check();
  require_shape(tr.inputs.cols() == p.input && tr.inputs.rows() == tr.steps(), "LSTM trace has no matching inputs");
  const LstmDeltas d = lstm_deltas(p, tr, grad_h);
  const Index H = p.hidden;
  LstmBackward out;
  out.params.weights.resize(4 * H, H + p.input);
  out.params.weights.leftCols(H) = d.recurrent;
  out.params.weights.rightCols(p.input).noalias() = d.dz.transpose() * tr.inputs;
  out.params.bias = d.bias;
  out.inputs.noalias() = d.dz * p.input_weights();
  return out;
}

struct DenseParams {
  Vector weights;
  double bias = 0.0;

  bool operator==(const DenseParams&) const = default;
};

inline double dense_sigmoid(const DenseParams& p, const Vector& x) {
  require_shape(p.weights.size() == x.size(), "dense input size mismatch");
  return sigmoid(p.weights.dot(x) + p.bias);
}

}  // namespace sigver
