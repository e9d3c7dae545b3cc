#pragma once

// Siamese verifier: one LSTM branch applied to both signatures with a single
// parameter set, per-step concatenation of the two branch outputs, a merge
// LSTM over the joint sequence and a sigmoid unit producing the pair score.

#include "sigver/common.hpp"
#include "sigver/features.hpp"
#include "sigver/lstm.hpp"
#include "sigver/parallel.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sigver {

enum class Concatenation : std::uint32_t { PerStep = 0, FinalState = 1 };
enum class Readout : std::uint32_t { LastStep = 0, MeanOverTime = 1 };

struct SiameseConfig {
  Index input_size = kNumTimeFunctions;
  Index branch_hidden = 46;
  Index merge_hidden = 23;
  Concatenation concatenation = Concatenation::PerStep;
  Readout readout = Readout::LastStep;
  /// Average the scores of both input orders.
  bool symmetrize = true;

  bool operator==(const SiameseConfig&) const = default;
};

/// Trainable parameters; the same shape doubles as the gradient container.
struct SiameseParams {
  LstmParams branch;  // shared by both inputs
  LstmParams merge;
  DenseParams head;

  bool operator==(const SiameseParams&) const = default;

  static SiameseParams zeros(const SiameseConfig& cfg) {
    SiameseParams p;
    p.branch = LstmParams(cfg.branch_hidden, cfg.input_size);
    p.merge = LstmParams(cfg.merge_hidden, 2 * cfg.branch_hidden);
    p.head.weights = Vector::Zero(cfg.merge_hidden);
    p.head.bias = 0.0;
    return p;
  }
};

struct SiameseModel {
  SiameseConfig config;
  SiameseParams params;

  bool operator==(const SiameseModel&) const = default;
};

struct NamedTensor {
  std::string_view name;
  std::span<double> values;
  Index rows;
  Index cols;
};

/// Flat views over every parameter tensor, in serialization order.
inline std::array<NamedTensor, 6> tensors(SiameseParams& p) {
  auto view = [](std::string_view name, auto& m) {
    return NamedTensor{name, std::span<double>(m.data(), static_cast<std::size_t>(m.size())), m.rows(), m.cols()};
  };
  return {view("branch.weights", p.branch.weights), view("branch.bias", p.branch.bias),
          view("merge.weights", p.merge.weights),   view("merge.bias", p.merge.bias),
          view("head.weights", p.head.weights),     NamedTensor{"head.bias", std::span<double>(&p.head.bias, 1), 1, 1}};
}

inline SiameseModel zero_model(const SiameseConfig& cfg = {}) { return {cfg, SiameseParams::zeros(cfg)}; }

/// Uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases except
/// the forget gates, which start at 1.
inline SiameseModel initialize_model(const SiameseConfig& cfg, std::uint64_t seed) {
  SiameseModel m = zero_model(cfg);
  std::mt19937_64 rng(seed);
  auto uniform = [&](double r) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
    return (2.0 * u - 1.0) * r;
  };
  auto fill_lstm = [&](LstmParams& p) {
    const double r = 1.0 / std::sqrt(static_cast<double>(p.hidden + p.input));
    for (Index j = 0; j < p.weights.cols(); ++j)
      for (Index i = 0; i < p.weights.rows(); ++i) p.weights(i, j) = uniform(r);
    p.bias.setZero();
    p.gate_bias(Gate::Forget).setConstant(1.0);
  };
  fill_lstm(m.params.branch);
  fill_lstm(m.params.merge);
  const double r = 1.0 / std::sqrt(static_cast<double>(cfg.merge_hidden));
  for (Index i = 0; i < m.params.head.weights.size(); ++i) m.params.head.weights[i] = uniform(r);
  m.params.head.bias = 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Forward / backward

inline std::vector<char> valid_mask(const FeatureSequence& seq) {
  std::vector<char> mask(static_cast<std::size_t>(seq.rows()), 0);
  std::fill_n(mask.begin(), static_cast<std::size_t>(seq.steps), 1);
  return mask;
}

inline void check_sequence(const SiameseModel& m, const FeatureSequence& seq) {
  if (seq.cols() != m.config.input_size) {
    throw ShapeError("feature sequence has " + std::to_string(seq.cols()) + " columns, model expects " +
                     std::to_string(m.config.input_size));
  }
  require_shape(seq.steps >= 1 && seq.steps <= seq.rows(), "feature sequence has no valid steps");
}

/// Branch pass over one signature.
inline LstmTrace encode(const SiameseModel& m, const FeatureSequence& seq) {
  check_sequence(m, seq);
  return lstm_forward(m.params.branch, seq.values, valid_mask(seq));
}

/// Branch output of one signature together with its contribution to the
/// merge-layer pre-activations. The merge input weights split into a block
/// for the first and one for the second pair member, so W_x [h_a; h_b] =
/// first_a + second_b and the projections are shared by every pair.
struct Encoded {
  LstmTrace trace;
  Index steps = 0;
  SeqMatrix first;   // steps x 4H_merge
  SeqMatrix second;  // steps x 4H_merge
};

namespace detail {

inline auto merge_first_weights(const SiameseModel& m) {
  return m.params.merge.weights.middleCols(m.config.merge_hidden, m.config.branch_hidden);
}
inline auto merge_second_weights(const SiameseModel& m) {
  return m.params.merge.weights.rightCols(m.config.branch_hidden);
}

/// Merge-layer length for a pair.
inline Index merge_steps(const SiameseConfig& cfg, Index sa, Index sb) {
  return cfg.concatenation == Concatenation::FinalState ? 1 : std::max(sa, sb);
}

/// Branch-output row feeding merge step t. The shorter sequence is extended
/// with its last valid row, which is exactly what a masked padding step
/// produces.
inline Index source_row(const SiameseConfig& cfg, Index t, Index steps) {
  return cfg.concatenation == Concatenation::FinalState ? steps - 1 : std::min(t, steps - 1);
}

inline Vector readout(const SiameseConfig& cfg, const SeqMatrix& hidden) {
  if (cfg.readout == Readout::MeanOverTime) return hidden.colwise().mean().transpose();
  return hidden.row(hidden.rows() - 1).transpose();
}

struct OrderedPass {
  LstmTrace merge;
  Vector features;  // readout
  double score = 0.0;
};

inline OrderedPass ordered_forward(const SiameseModel& m, const Encoded& a, const Encoded& b) {
  const auto& cfg = m.config;
  const Index T = merge_steps(cfg, a.steps, b.steps);
  const Vector& bias = m.params.merge.bias;
  OrderedPass pass;
  pass.merge = lstm_scan(m.params.merge, std::vector<char>(static_cast<std::size_t>(T), 1), [&](Index t, Vector& z) {
    z.noalias() = a.first.row(source_row(cfg, t, a.steps)).transpose() +
                  b.second.row(source_row(cfg, t, b.steps)).transpose() + bias;
  });
  pass.features = readout(cfg, pass.merge.hidden);
  pass.score = dense_sigmoid(m.params.head, pass.features);
  return pass;
}

/// Backpropagates d(loss)/d(score) through the head and the merge recurrence
/// of one ordered pass. Head, recurrent and bias gradients are accumulated
/// into `grads`; the merge pre-activation deltas are returned for the caller
/// to route back to the two branch outputs.
inline SeqMatrix ordered_backward(const SiameseModel& m, const OrderedPass& pass, double dscore,
                                  SiameseParams& grads) {
  const double dz = dscore * pass.score * (1.0 - pass.score);
  grads.head.weights += dz * pass.features;
  grads.head.bias += dz;
  const Vector dr = dz * m.params.head.weights;

  const Index Tm = pass.merge.steps();
  SeqMatrix grad_h = SeqMatrix::Zero(Tm, m.config.merge_hidden);
  if (m.config.readout == Readout::MeanOverTime) {
    grad_h.rowwise() = dr.transpose() / static_cast<double>(Tm);
  } else {
    grad_h.row(Tm - 1) = dr.transpose();
  }
  LstmDeltas d = lstm_deltas(m.params.merge, pass.merge, grad_h);
  grads.merge.weights.leftCols(m.config.merge_hidden) += d.recurrent;
  grads.merge.bias += d.bias;
  return std::move(d.dz);
}

/// Adds merge deltas to the rows of a branch-side accumulator they came from.
inline void scatter(const SiameseConfig& cfg, const SeqMatrix& dz, Index steps, SeqMatrix& acc) {
  for (Index t = 0; t < dz.rows(); ++t) acc.row(source_row(cfg, t, steps)) += dz.row(t);
}

inline double combine(const SiameseConfig& cfg, double ab, double ba) {
  return cfg.symmetrize ? 0.5 * (ab + ba) : ab;
}

/// Distinct sequences (by address) of a pair list and each pair's two slots.
struct UniqueSequences {
  std::vector<const FeatureSequence*> sequences;
  std::vector<std::array<std::size_t, 2>> slots;
};

}  // namespace detail

/// Branch pass plus merge projections for one signature.
inline Encoded encode_projected(const SiameseModel& m, const FeatureSequence& seq) {
  Encoded e;
  e.trace = encode(m, seq);
  e.steps = seq.steps;
  const auto valid = e.trace.hidden.topRows(e.steps);
  e.first.noalias() = valid * detail::merge_first_weights(m).transpose();
  e.second.noalias() = valid * detail::merge_second_weights(m).transpose();
  return e;
}

/// Score from already-encoded signatures.
inline double score_encoded(const SiameseModel& m, const Encoded& a, const Encoded& b) {
  const double ab = detail::ordered_forward(m, a, b).score;
  if (!m.config.symmetrize) return ab;
  const double ba = detail::ordered_forward(m, b, a).score;
  return detail::combine(m.config, ab, ba);
}

/// Similarity score in (0, 1); higher means more likely the same writer.
inline double score_pair(const SiameseModel& m, const FeatureSequence& a, const FeatureSequence& b) {
  return score_encoded(m, encode_projected(m, a), encode_projected(m, b));
}

inline constexpr double kScoreClamp = 1e-12;

/// Binary cross-entropy of the pair score against the label.
inline double pair_loss(double score, int label) {
  const double s = std::clamp(score, kScoreClamp, 1.0 - kScoreClamp);
  return label == 1 ? -std::log(s) : -std::log(1.0 - s);
}

inline double pair_loss_derivative(double score, int label) {
  if (score < kScoreClamp || score > 1.0 - kScoreClamp) return 0.0;
  return label == 1 ? -1.0 / score : 1.0 / (1.0 - score);
}

struct LabeledPair {
  const FeatureSequence* first = nullptr;
  const FeatureSequence* second = nullptr;
  int label = 0;
};

namespace detail {

inline UniqueSequences unique_sequences(std::span<const LabeledPair> pairs) {
  UniqueSequences u;
  std::map<const FeatureSequence*, std::size_t> slot;
  u.slots.resize(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    for (std::size_t side = 0; side < 2; ++side) {
      const FeatureSequence* s = side == 0 ? pairs[k].first : pairs[k].second;
      if (s == nullptr) throw Error("pair " + std::to_string(k) + " has a null sequence");
      auto [it, inserted] = slot.emplace(s, u.sequences.size());
      if (inserted) u.sequences.push_back(s);
      u.slots[k][side] = it->second;
    }
  }
  return u;
}

}  // namespace detail

struct BatchGradient {
  std::vector<double> scores;
  std::vector<double> losses;
  SiameseParams grads;  // sum over the batch, not the mean
};

/// Losses and summed parameter gradients for a batch of pairs. Each distinct
/// sequence is encoded once and receives the gradients of every pair it
/// appears in. Reductions follow batch order, so results do not depend on the
/// worker count.
inline BatchGradient batch_gradient(const SiameseModel& m, std::span<const LabeledPair> batch, unsigned workers = 1) {
  const auto& cfg = m.config;
  const auto u = detail::unique_sequences(batch);
  std::vector<Encoded> enc(u.sequences.size());
  parallel_for(enc.size(), workers, [&](std::size_t i) { enc[i] = encode_projected(m, *u.sequences[i]); });

  struct PairContribution {
    SiameseParams grads;  // head, merge recurrent and merge bias only
    SeqMatrix dz_ab, dz_ba;
    double score = 0.0;
  };
  std::vector<PairContribution> contrib(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t k) {
    const auto& a = enc[u.slots[k][0]];
    const auto& b = enc[u.slots[k][1]];
    auto& c = contrib[k];
    c.grads.merge = LstmParams(cfg.merge_hidden, 2 * cfg.branch_hidden);
    c.grads.head.weights = Vector::Zero(cfg.merge_hidden);
    const auto ab = detail::ordered_forward(m, a, b);
    if (cfg.symmetrize) {
      const auto ba = detail::ordered_forward(m, b, a);
      c.score = detail::combine(cfg, ab.score, ba.score);
      const double ds = 0.5 * pair_loss_derivative(c.score, batch[k].label);
      c.dz_ab = detail::ordered_backward(m, ab, ds, c.grads);
      c.dz_ba = detail::ordered_backward(m, ba, ds, c.grads);
    } else {
      c.score = ab.score;
      c.dz_ab = detail::ordered_backward(m, ab, pair_loss_derivative(c.score, batch[k].label), c.grads);
    }
  });

  BatchGradient out;
  out.grads = SiameseParams::zeros(cfg);
  out.scores.resize(batch.size());
  out.losses.resize(batch.size());
  const Index G = 4 * cfg.merge_hidden;
  std::vector<SeqMatrix> d_first(enc.size()), d_second(enc.size());
  for (std::size_t i = 0; i < enc.size(); ++i) {
    d_first[i] = SeqMatrix::Zero(enc[i].steps, G);
    d_second[i] = SeqMatrix::Zero(enc[i].steps, G);
  }
  for (std::size_t k = 0; k < batch.size(); ++k) {
    auto& c = contrib[k];
    const auto [ia, ib] = u.slots[k];
    out.scores[k] = c.score;
    out.losses[k] = pair_loss(c.score, batch[k].label);
    out.grads.merge.weights += c.grads.merge.weights;
    out.grads.merge.bias += c.grads.merge.bias;
    out.grads.head.weights += c.grads.head.weights;
    out.grads.head.bias += c.grads.head.bias;
    detail::scatter(cfg, c.dz_ab, enc[ia].steps, d_first[ia]);
    detail::scatter(cfg, c.dz_ab, enc[ib].steps, d_second[ib]);
    if (cfg.symmetrize) {
      detail::scatter(cfg, c.dz_ba, enc[ib].steps, d_first[ib]);
      detail::scatter(cfg, c.dz_ba, enc[ia].steps, d_second[ia]);
    }
  }
  contrib.clear();

  struct SequenceGrads {
    LstmGrads branch;
    Matrix merge_first, merge_second;
  };
  std::vector<SequenceGrads> seq(enc.size());
  parallel_for(enc.size(), workers, [&](std::size_t i) {
    const auto& e = enc[i];
    const auto valid = e.trace.hidden.topRows(e.steps);
    auto& g = seq[i];
    g.merge_first.noalias() = d_first[i].transpose() * valid;
    g.merge_second.noalias() = d_second[i].transpose() * valid;
    SeqMatrix grad_h = SeqMatrix::Zero(e.trace.hidden.rows(), cfg.branch_hidden);
    grad_h.topRows(e.steps).noalias() = d_first[i] * detail::merge_first_weights(m);
    grad_h.topRows(e.steps).noalias() += d_second[i] * detail::merge_second_weights(m);
    g.branch = lstm_backward(m.params.branch, e.trace, grad_h).params;
  });
  for (const auto& g : seq) {
    out.grads.branch.weights += g.branch.weights;
    out.grads.branch.bias += g.branch.bias;
    out.grads.merge.weights.middleCols(cfg.merge_hidden, cfg.branch_hidden) += g.merge_first;
    out.grads.merge.weights.rightCols(cfg.branch_hidden) += g.merge_second;
  }
  return out;
}

/// Scores for many pairs; sequences shared between pairs are encoded once per
/// chunk of `chunk` consecutive pairs.
inline std::vector<double> score_pairs(const SiameseModel& m, std::span<const LabeledPair> pairs, unsigned workers = 1,
                                       std::size_t chunk = 2048) {
  std::vector<double> scores(pairs.size());
  for (std::size_t begin = 0; begin < pairs.size(); begin += chunk) {
    const auto part = pairs.subspan(begin, std::min(chunk, pairs.size() - begin));
    const auto u = detail::unique_sequences(part);
    std::vector<Encoded> enc(u.sequences.size());
    parallel_for(enc.size(), workers, [&](std::size_t i) { enc[i] = encode_projected(m, *u.sequences[i]); });
    parallel_for(part.size(), workers, [&](std::size_t k) {
      scores[begin + k] = score_encoded(m, enc[u.slots[k][0]], enc[u.slots[k][1]]);
    });
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Model file (little-endian):
//   "SGVMODEL"  8-byte magic
//   u32 version (1)
//   u32 input_size, branch_hidden, merge_hidden, concatenation, readout, symmetrize
//   u32 tensor count
//   per tensor: u32 name length, name bytes, u64 rows, u64 cols,
//               rows*cols f64 values in column-major order

inline constexpr std::string_view kModelMagic = "SGVMODEL";
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "model I/O assumes a little-endian host");

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw FormatError("model file truncated");
  return value;
}

}  // namespace detail

inline void save_model(const SiameseModel& model, std::ostream& out) {
  out.write(kModelMagic.data(), static_cast<std::streamsize>(kModelMagic.size()));
  detail::put<std::uint32_t>(out, kModelVersion);
  const auto& c = model.config;
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.input_size));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.branch_hidden));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.merge_hidden));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.concatenation));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.readout));
  detail::put<std::uint32_t>(out, c.symmetrize ? 1u : 0u);
  SiameseParams params = model.params;
  const auto views = tensors(params);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(views.size()));
  for (const auto& t : views) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows));
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols));
    out.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size_bytes()));
  }
  if (!out) throw Error("failed to write model");
}

inline SiameseModel load_model(std::istream& in) {
  std::string magic(kModelMagic.size(), '\0');
  if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kModelMagic) {
    throw FormatError("not a model file (bad magic)");
  }
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kModelVersion) {
    throw FormatError("unsupported model version " + std::to_string(version) + ", expected " +
                      std::to_string(kModelVersion));
  }
  SiameseConfig cfg;
  cfg.input_size = detail::get<std::uint32_t>(in);
  cfg.branch_hidden = detail::get<std::uint32_t>(in);
  cfg.merge_hidden = detail::get<std::uint32_t>(in);
  const auto concat = detail::get<std::uint32_t>(in);
  const auto readout = detail::get<std::uint32_t>(in);
  const auto symmetrize = detail::get<std::uint32_t>(in);
  if (concat > 1 || readout > 1 || symmetrize > 1 || cfg.input_size == 0 || cfg.branch_hidden == 0 ||
      cfg.merge_hidden == 0 || cfg.input_size > 1u << 16 || cfg.branch_hidden > 1u << 16 ||
      cfg.merge_hidden > 1u << 16) {
    throw FormatError("corrupt model header");
  }
  cfg.concatenation = static_cast<Concatenation>(concat);
  cfg.readout = static_cast<Readout>(readout);
  cfg.symmetrize = symmetrize == 1;

  SiameseModel model = zero_model(cfg);
  auto views = tensors(model.params);
  if (detail::get<std::uint32_t>(in) != views.size()) throw FormatError("unexpected tensor count");
  for (auto& t : views) {
    const auto len = detail::get<std::uint32_t>(in);
    if (len > 256) throw FormatError("corrupt tensor name");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError("model file truncated");
    if (name != t.name) throw FormatError("expected tensor " + std::string(t.name) + ", found " + name);
    const auto rows = detail::get<std::uint64_t>(in);
    const auto cols = detail::get<std::uint64_t>(in);
    if (rows != static_cast<std::uint64_t>(t.rows) || cols != static_cast<std::uint64_t>(t.cols)) {
      throw FormatError("shape mismatch for tensor " + name);
    }
    if (!in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size_bytes()))) {
      throw FormatError("model file truncated");
    }
  }
  return model;
}

inline void save_model(const SiameseModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  save_model(model, out);
}

inline SiameseModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return load_model(in);
}

}  // namespace sigver
