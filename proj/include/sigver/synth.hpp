#pragma once

// Deterministic synthetic signature corpora. Each user owns a smooth
// Catmull-Rom trajectory with a speed profile, a pressure profile and one
// pen-up gap. Genuine samples add a per-session low-frequency warp and
// per-sample jitter; skilled forgeries are drawn the same way and then get a
// shape distortion, timing warp and pressure change scaled by `forgery_noise`.

#include "sigver/common.hpp"
#include "sigver/config.hpp"
#include "sigver/parallel.hpp"
#include "sigver/signature_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace sigver {

struct SynthConfig {
  int n_users = 40;
  int n_sessions = 4;
  int genuine_per_session = 4;
  int forgeries_per_user = 12;
  std::uint64_t seed = 7;
  int control_points = 8;
  double min_duration = 1.5;  // seconds at 100 Hz
  double max_duration = 4.0;
  /// Scales the per-session low-frequency warp.
  double session_jitter = 1.0;
  /// Standard deviation of per-sample coordinate noise (device units).
  double sample_jitter = 1.5;
  /// Scales every forgery distortion; 0 makes forgeries genuine-like.
  double forgery_noise = 1.0;
};

inline void validate(const SynthConfig& c) {
  if (c.n_users <= 0 || c.n_sessions <= 0 || c.genuine_per_session <= 0 || c.forgeries_per_user <= 0) {
    throw Error("synthetic corpus counts must be positive");
  }
  if (c.control_points < 4) throw Error("need at least 4 control points");
  if (!(c.min_duration > 0.0) || c.max_duration < c.min_duration) throw Error("invalid duration range");
  if (c.session_jitter < 0 || c.sample_jitter < 0 || c.forgery_noise < 0) throw Error("noise levels must be >= 0");
}

inline SynthConfig load_synth_config(const KeyValueConfig& kv, SynthConfig c = {}) {
  kv.get("n_users", c.n_users);
  kv.get("n_sessions", c.n_sessions);
  kv.get("genuine_per_session", c.genuine_per_session);
  kv.get("forgeries_per_user", c.forgeries_per_user);
  kv.get("seed", c.seed);
  kv.get("control_points", c.control_points);
  kv.get("min_duration", c.min_duration);
  kv.get("max_duration", c.max_duration);
  kv.get("session_jitter", c.session_jitter);
  kv.get("sample_jitter", c.sample_jitter);
  kv.get("forgery_noise", c.forgery_noise);
  kv.reject_unknown();
  return c;
}

inline std::string synth_user_id(int user) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "u%04d", user);
  return buf;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream per (seed, user, purpose, index).
inline std::mt19937_64 stream(std::uint64_t seed, int user, int purpose, int index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(user));
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ static_cast<std::uint64_t>(index));
  return std::mt19937_64(h);
}

struct Rand {
  std::mt19937_64 rng;
  double uniform(double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53); }
  double normal(double sd) { return sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(rng) : 0.0; }
};

inline constexpr int kSpeedHarmonics = 3;

struct Writer {
  std::vector<std::array<double, 2>> control;
  std::array<double, kSpeedHarmonics> speed{};  // monotone time-warp coefficients
  double duration = 2.0;                        // seconds
  double pressure_mean = 500.0;
  std::array<double, 2> pressure_amp{};
  std::array<double, 2> pressure_freq{};
  std::array<double, 2> pressure_phase{};
  double gap_start = 0.4;
  double gap_width = 0.08;
};

/// Low-frequency coordinate warp of one session.
struct SessionWarp {
  std::array<double, 2> amp{};
  std::array<double, 2> freq{};
  std::array<double, 2> phase{};
  double duration_scale = 1.0;
  std::array<double, kSpeedHarmonics> speed_delta{};
};

inline Writer make_writer(const SynthConfig& cfg, Rand& r) {
  Writer w;
  const int k = cfg.control_points + static_cast<int>(r.rng() % 5);
  for (int i = 0; i < k; ++i) {
    w.control.push_back({1000.0 + 70.0 * i + r.normal(20.0), 1000.0 + r.uniform(-120.0, 120.0)});
  }
  for (auto& a : w.speed) a = r.uniform(-0.25, 0.25);
  w.duration = r.uniform(cfg.min_duration, cfg.max_duration);
  w.pressure_mean = r.uniform(380.0, 620.0);
  for (int i = 0; i < 2; ++i) {
    w.pressure_amp[static_cast<std::size_t>(i)] = r.uniform(60.0, 200.0);
    w.pressure_freq[static_cast<std::size_t>(i)] = r.uniform(0.5, 4.0);
    w.pressure_phase[static_cast<std::size_t>(i)] = r.uniform(0.0, 2.0 * std::numbers::pi);
  }
  w.gap_start = r.uniform(0.3, 0.6);
  w.gap_width = r.uniform(0.05, 0.12);
  return w;
}

inline SessionWarp make_session(const SynthConfig& cfg, Rand& r) {
  SessionWarp s;
  for (std::size_t i = 0; i < 2; ++i) {
    s.amp[i] = cfg.session_jitter * r.uniform(3.0, 10.0);
    s.freq[i] = r.uniform(0.5, 1.5);
    s.phase[i] = r.uniform(0.0, 2.0 * std::numbers::pi);
  }
  s.duration_scale = std::exp(r.normal(0.03 * cfg.session_jitter));
  for (auto& d : s.speed_delta) d = r.normal(0.02 * cfg.session_jitter);
  return s;
}

/// Shape, timing and pressure distortion applied to a forger's attempt.
inline Writer distort(const Writer& w, double noise, Rand& r) {
  Writer f = w;
  for (auto& p : f.control) {
    p[0] += r.normal(27.0 * noise);
    p[1] += r.normal(27.0 * noise);
  }
  for (auto& a : f.speed) a += r.normal(0.18 * noise);
  f.duration *= std::exp(r.normal(0.45 * noise));
  f.pressure_mean += r.normal(90.0 * noise);
  for (std::size_t i = 0; i < 2; ++i) {
    f.pressure_amp[i] *= std::exp(r.normal(0.45 * noise));
    f.pressure_phase[i] += r.normal(1.2 * noise);
  }
  f.gap_start += r.normal(0.06 * noise);
  return f;
}

inline std::array<double, 2> catmull_rom(const std::vector<std::array<double, 2>>& c, double u) {
  const int n = static_cast<int>(c.size());
  const double pos = std::clamp(u, 0.0, 1.0) * (n - 1);
  const int seg = std::min(static_cast<int>(pos), n - 2);
  const double t = pos - seg;
  auto at = [&](int i) { return c[static_cast<std::size_t>(std::clamp(i, 0, n - 1))]; };
  const auto p0 = at(seg - 1), p1 = at(seg), p2 = at(seg + 1), p3 = at(seg + 2);
  std::array<double, 2> out{};
  for (std::size_t d = 0; d < 2; ++d) {
    out[d] = 0.5 * (2.0 * p1[d] + (-p0[d] + p2[d]) * t + (2.0 * p0[d] - 5.0 * p1[d] + 4.0 * p2[d] - p3[d]) * t * t +
                    (-p0[d] + 3.0 * p1[d] - 3.0 * p2[d] + p3[d]) * t * t * t);
  }
  return out;
}

inline SignatureRecord render(const SynthConfig& cfg, const Writer& w, const SessionWarp& s, Rand& r) {
  const double duration = w.duration * s.duration_scale * std::exp(r.normal(0.02));
  const int T = std::max(7, static_cast<int>(std::lround(duration * 100.0)));
  std::array<double, kSpeedHarmonics> speed = w.speed;
  double total = 0.0;
  for (std::size_t m = 0; m < speed.size(); ++m) {
    speed[m] += s.speed_delta[m];
    total += std::abs(speed[m]);
  }
  if (total > 0.9) {
    for (auto& a : speed) a *= 0.9 / total;  // keeps the warp monotone
  }
  const double dx0 = r.uniform(-30.0, 30.0);
  const double dy0 = r.uniform(-30.0, 30.0);
  const double pressure_gain = std::exp(r.normal(0.05));

  SignatureRecord rec;
  rec.samples.reserve(static_cast<std::size_t>(T));
  for (int n = 0; n < T; ++n) {
    const double tau = static_cast<double>(n) / (T - 1);
    double u = tau;
    for (std::size_t m = 0; m < speed.size(); ++m) {
      const double k = std::numbers::pi * static_cast<double>(m + 1);
      u += speed[m] * std::sin(k * tau) / k;
    }
    auto p = catmull_rom(w.control, u);
    for (std::size_t d = 0; d < 2; ++d) {
      p[d] += s.amp[d] * std::sin(2.0 * std::numbers::pi * s.freq[d] * tau + s.phase[d]) + r.normal(cfg.sample_jitter);
    }
    double z = w.pressure_mean;
    for (std::size_t i = 0; i < 2; ++i) {
      z += w.pressure_amp[i] * std::sin(2.0 * std::numbers::pi * w.pressure_freq[i] * tau + w.pressure_phase[i]);
    }
    z = z * pressure_gain + r.normal(8.0);
    PenSample ps;
    ps.x = std::llround(p[0] + dx0);
    ps.y = std::llround(p[1] + dy0);
    ps.timestamp = static_cast<std::int64_t>(n) * 10;
    ps.pen_down = !(u >= w.gap_start && u < w.gap_start + w.gap_width);
    ps.pressure = ps.pen_down ? static_cast<int>(std::clamp(std::lround(z), 40L, 1000L)) : 0;
    rec.samples.push_back(ps);
  }
  // At least one pen-up sample per signature.
  if (std::none_of(rec.samples.begin(), rec.samples.end(), [](const PenSample& q) { return !q.pen_down; })) {
    auto& q = rec.samples[rec.samples.size() / 2];
    q.pen_down = false;
    q.pressure = 0;
  }
  return rec;
}

}  // namespace detail

/// All records of the corpus, sorted by (user, kind, session, index). Users
/// are generated independently from (seed, user), so `workers` never changes
/// the output.
inline std::vector<SignatureRecord> generate_corpus(const SynthConfig& cfg, unsigned workers = 1) {
  validate(cfg);
  enum Purpose { kWriter = 1, kSession = 2, kGenuine = 3, kForgerySession = 4, kForgery = 5 };
  std::vector<std::vector<SignatureRecord>> per_user(static_cast<std::size_t>(cfg.n_users));
  parallel_for(per_user.size(), workers, [&](std::size_t ui) {
    const int user = static_cast<int>(ui);
    detail::Rand wr{detail::stream(cfg.seed, user, kWriter, 0)};
    const auto writer = detail::make_writer(cfg, wr);
    auto& out = per_user[ui];
    for (int s = 1; s <= cfg.n_sessions; ++s) {
      detail::Rand sr{detail::stream(cfg.seed, user, kSession, s)};
      const auto session = detail::make_session(cfg, sr);
      for (int k = 0; k < cfg.genuine_per_session; ++k) {
        detail::Rand gr{detail::stream(cfg.seed, user, kGenuine, s * 1000 + k)};
        auto rec = detail::render(cfg, writer, session, gr);
        rec.user_id = synth_user_id(user);
        rec.session = s;
        rec.kind = SignatureKind::Genuine;
        rec.sample_index = k;
        out.push_back(std::move(rec));
      }
    }
    for (int k = 0; k < cfg.forgeries_per_user; ++k) {
      detail::Rand sr{detail::stream(cfg.seed, user, kForgerySession, k)};
      const auto session = detail::make_session(cfg, sr);
      detail::Rand fr{detail::stream(cfg.seed, user, kForgery, k)};
      const auto forged = detail::distort(writer, cfg.forgery_noise, fr);
      auto rec = detail::render(cfg, forged, session, fr);
      rec.user_id = synth_user_id(user);
      rec.session = k % cfg.n_sessions + 1;
      rec.kind = SignatureKind::SkilledForgery;
      rec.sample_index = k / cfg.n_sessions;
      out.push_back(std::move(rec));
    }
  });
  std::vector<SignatureRecord> all;
  for (auto& u : per_user) {
    for (auto& r : u) all.push_back(std::move(r));
  }
  sort_records(all);
  return all;
}

}  // namespace sigver
