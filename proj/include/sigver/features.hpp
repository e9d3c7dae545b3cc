#pragma once

// The 23 local time functions computed from pen coordinates and pressure.
// Column c (0-based) holds time function c+1:
//
//   1  x          2  y          3  pressure    4  path-tangent angle theta
//   5  speed v    6  log curvature radius rho  7  total acceleration a
//   8-14  first derivatives of 1-7
//   15-16 second derivatives of x and y
//   17 min/max speed ratio over a centered 5-sample window
//   18 angle alpha of consecutive samples   19 derivative of alpha
//   20 sin(alpha)  21 cos(alpha)
//   22-23 stroke length / bounding-box width over 5- and 7-sample windows

#include "sigver/common.hpp"
#include "sigver/signature_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <string_view>

namespace sigver {

inline constexpr Index kNumTimeFunctions = 23;
/// Guards divisions and the logarithm at zero speed or curvature.
inline constexpr double kFeatureEpsilon = 1e-8;
inline constexpr Index kMinFeatureLength = 7;

inline constexpr std::array<std::string_view, kNumTimeFunctions> kTimeFunctionNames = {
    "1:x",       "2:y",       "3:z",        "4:theta",  "5:v",      "6:rho",   "7:a",     "8:dx",
    "9:dy",      "10:dz",     "11:dtheta",  "12:dv",    "13:drho",  "14:da",   "15:ddx",  "16:ddy",
    "17:vr",     "18:alpha",  "19:dalpha",  "20:sin",   "21:cos",   "22:r5",   "23:r7"};

/// T x 23 time functions. Rows at and beyond `steps` are trailing padding.
struct FeatureSequence {
  SeqMatrix values;
  Index steps = 0;
  std::string source;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

struct ExtractOptions {
  bool normalize = true;
  /// Divide by the local sampling-interval derivative instead of assuming a
  /// uniform 100 Hz grid.
  bool timestamp_aware = false;
};

/// Second-order regression derivative
///   d_n = (s_{n+1} - s_{n-1} + 2 (s_{n+2} - s_{n-2})) / 10
/// with the two boundary samples on each side copying the nearest interior
/// value. Sequences shorter than 5 use central differences inside and
/// one-sided differences at the ends.
inline Vector derivative(const Vector& s) {
  const Index n = s.size();
  if (n < 2) throw Error("derivative needs at least 2 samples");
  Vector d(n);
  if (n >= 5) {
    for (Index i = 2; i + 2 < n; ++i) {
      d[i] = (s[i + 1] - s[i - 1] + 2.0 * (s[i + 2] - s[i - 2])) / 10.0;
    }
    d[0] = d[1] = d[2];
    d[n - 1] = d[n - 2] = d[n - 3];
    return d;
  }
  d[0] = s[1] - s[0];
  d[n - 1] = s[n - 1] - s[n - 2];
  for (Index i = 1; i + 1 < n; ++i) d[i] = (s[i + 1] - s[i - 1]) / 2.0;
  return d;
}

/// Removes 2*pi jumps so that angle differences stay in (-pi, pi].
inline Vector unwrap_angle(const Vector& a) {
  Vector out = a;
  double offset = 0.0;
  for (Index i = 1; i < a.size(); ++i) {
    const double step = a[i] - a[i - 1];
    if (step > std::numbers::pi) {
      offset -= 2.0 * std::numbers::pi;
    } else if (step < -std::numbers::pi) {
      offset += 2.0 * std::numbers::pi;
    }
    out[i] = a[i] + offset;
  }
  return out;
}

namespace detail {

/// z-scores each column in place; columns with zero spread become all-zero.
inline void zscore_columns(SeqMatrix& m) {
  const double rows = static_cast<double>(m.rows());
  for (Index c = 0; c < m.cols(); ++c) {
    auto col = m.col(c);
    const double mean = col.sum() / rows;
    const double var = (col.array() - mean).square().sum() / rows;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      col.setZero();
    } else {
      col = (col.array() - mean) / sd;
    }
  }
}

}  // namespace detail

inline FeatureSequence extract_features(const SignatureRecord& record, const ExtractOptions& options = {}) {
  const Index T = static_cast<Index>(record.samples.size());
  if (T < kMinFeatureLength) {
    throw Error(record.ref() + ": sequence too short (" + std::to_string(T) + " samples, need " +
                std::to_string(kMinFeatureLength) + ")");
  }
  constexpr double eps = kFeatureEpsilon;

  Vector x(T), y(T), z(T), t(T);
  for (Index n = 0; n < T; ++n) {
    const auto& s = record.samples[static_cast<std::size_t>(n)];
    x[n] = static_cast<double>(s.x);
    y[n] = static_cast<double>(s.y);
    z[n] = static_cast<double>(s.pressure);
    t[n] = static_cast<double>(s.timestamp) / 10.0;  // units of 100 Hz sample periods
  }

  Vector dt_dn;
  if (options.timestamp_aware) {
    dt_dn = derivative(t).cwiseMax(eps);
  }
  auto diff = [&](const Vector& s) -> Vector {
    Vector d = derivative(s);
    if (options.timestamp_aware) d.array() /= dt_dn.array();
    return d;
  };

  const Vector dx = diff(x);
  const Vector dy = diff(y);
  Vector dz = diff(z);
  if (!record.has_pressure) dz.setZero();

  Vector theta(T), v(T);
  for (Index n = 0; n < T; ++n) {
    theta[n] = std::atan2(dy[n], dx[n]);
    v[n] = std::sqrt(dx[n] * dx[n] + dy[n] * dy[n]);
  }
  // Angular rate is taken on the unwrapped angle; column 4 keeps the wrapped value.
  const Vector dtheta = diff(unwrap_angle(theta));
  const Vector dv = diff(v);

  Vector rho(T), acc(T);
  for (Index n = 0; n < T; ++n) {
    rho[n] = std::log((v[n] + eps) / (std::abs(dtheta[n]) + eps));
    const double centripetal = v[n] * dtheta[n];
    acc[n] = std::sqrt(dv[n] * dv[n] + centripetal * centripetal);
  }

  // Row 17: min/max speed ratio over the centered 5-sample window, clipped at the ends.
  Vector speed_ratio(T);
  for (Index n = 0; n < T; ++n) {
    const Index lo = std::max<Index>(0, n - 2);
    const Index hi = std::min<Index>(T - 1, n + 2);
    const auto window = v.segment(lo, hi - lo + 1);
    speed_ratio[n] = window.minCoeff() / (window.maxCoeff() + eps);
  }

  // Row 18: direction between consecutive samples; the last sample repeats the previous one.
  Vector alpha(T);
  for (Index n = 0; n + 1 < T; ++n) alpha[n] = std::atan2(y[n + 1] - y[n], x[n + 1] - x[n]);
  alpha[T - 1] = alpha[T - 2];
  const Vector dalpha = diff(unwrap_angle(alpha));

  // Rows 22-23: path length inside the window over its x extent.
  auto length_width = [&](Index half) {
    Vector r(T);
    for (Index n = 0; n < T; ++n) {
      const Index lo = std::max<Index>(0, n - half);
      const Index hi = std::min<Index>(T - 1, n + half);
      double length = 0.0;
      for (Index k = lo; k < hi; ++k) length += std::hypot(x[k + 1] - x[k], y[k + 1] - y[k]);
      const auto xs = x.segment(lo, hi - lo + 1);
      r[n] = length / (xs.maxCoeff() - xs.minCoeff() + eps);
    }
    return r;
  };

  FeatureSequence out;
  out.values.resize(T, kNumTimeFunctions);
  out.steps = T;
  out.source = record.ref();
  auto& m = out.values;
  m.col(0) = x;
  m.col(1) = y;
  m.col(2) = z;
  m.col(3) = theta;
  m.col(4) = v;
  m.col(5) = rho;
  m.col(6) = acc;
  m.col(7) = dx;
  m.col(8) = dy;
  m.col(9) = dz;
  m.col(10) = dtheta;
  m.col(11) = dv;
  m.col(12) = diff(rho);
  m.col(13) = diff(acc);
  m.col(14) = diff(dx);
  m.col(15) = diff(dy);
  m.col(16) = speed_ratio;
  m.col(17) = alpha;
  m.col(18) = dalpha;
  m.col(19) = alpha.array().sin();
  m.col(20) = alpha.array().cos();
  m.col(21) = length_width(2);
  m.col(22) = length_width(3);

  if (!m.allFinite()) throw Error(record.ref() + ": non-finite time function value");
  if (options.normalize) detail::zscore_columns(m);
  return out;
}

/// Appends `extra` all-zero padding rows; `steps` is unchanged.
inline FeatureSequence with_padding(FeatureSequence seq, Index extra) {
  const Index rows = seq.values.rows();
  seq.values.conservativeResize(rows + extra, Eigen::NoChange);
  seq.values.bottomRows(extra).setZero();
  return seq;
}

/// CSV dump: header row naming the 23 functions, then one row per valid step.
inline void write_feature_csv(std::ostream& out, const FeatureSequence& seq) {
  for (Index c = 0; c < kNumTimeFunctions; ++c) out << (c ? "," : "") << kTimeFunctionNames[static_cast<std::size_t>(c)];
  out << '\n';
  const auto old = out.precision(17);
  for (Index r = 0; r < seq.steps; ++r) {
    for (Index c = 0; c < seq.values.cols(); ++c) out << (c ? "," : "") << seq.values(r, c);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace sigver
