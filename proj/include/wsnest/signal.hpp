#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace wsnest {

enum class SignalKind { multisine, piecewise, constant, ramp };

inline std::string to_string(SignalKind k) {
  switch (k) {
    case SignalKind::multisine: return "multisine";
    case SignalKind::piecewise: return "piecewise";
    case SignalKind::constant: return "constant";
    case SignalKind::ramp: return "ramp";
  }
  return "?";
}

inline SignalKind signal_kind_from_string(const std::string& s) {
  if (s == "multisine") return SignalKind::multisine;
  if (s == "piecewise") return SignalKind::piecewise;
  if (s == "constant") return SignalKind::constant;
  if (s == "ramp") return SignalKind::ramp;
  throw std::invalid_argument("unknown signal kind '" + s + "'");
}

struct SignalSpec {
  SignalKind kind = SignalKind::multisine;
  double freq_scale = 1.0;  // d_1..d_5 use 1, 2, 4, 8, 16
  double cycles = 8.0;      // periods of the slowest component over the trace at freq_scale 1
  double amplitude = 1.0;
  std::size_t length = 500;
  double slope = 0.05;      // ramp only
  std::uint64_t seed = 1;   // shape of the waveform; fixed across trials
};

struct Signal {
  std::vector<double> values;
  double delta_cap = 0.0;  // max_t |d(t) - d(t-1)|
};

namespace detail {

inline double max_increment(const std::vector<double>& v) {
  double d = 0.0;
  for (std::size_t t = 1; t < v.size(); ++t) d = std::max(d, std::abs(v[t] - v[t - 1]));
  return d;
}

}  // namespace detail

/// Test waveform. multisine is three incommensurate sinusoids under a
/// smooth on/off gate, so the signal alternates between nearly flat and
/// steeper stretches; freq_scale multiplies every frequency. piecewise is a
/// linear interpolation of random levels at cycles * freq_scale knots.
template <class Rng>
Signal generate_signal(const SignalSpec& spec, Rng& rng) {
  if (spec.length < 1) throw std::invalid_argument("signal length must be >= 1");
  if (!(spec.freq_scale > 0.0)) throw std::invalid_argument("freq_scale must be positive");
  if (!(spec.cycles > 0.0)) throw std::invalid_argument("cycles must be positive");
  Signal sig;
  sig.values.resize(spec.length);
  const double len = static_cast<double>(spec.length);
  const double rate = spec.cycles * spec.freq_scale;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  switch (spec.kind) {
    case SignalKind::constant:
      std::fill(sig.values.begin(), sig.values.end(), spec.amplitude);
      break;
    case SignalKind::ramp:
      for (std::size_t t = 0; t < spec.length; ++t) sig.values[t] = spec.slope * static_cast<double>(t);
      break;
    case SignalKind::multisine: {
      std::uniform_real_distribution<double> phase(0.0, two_pi);
      std::uniform_real_distribution<double> weight(0.5, 1.0);
      constexpr double freqs[3] = {1.0, 1.6180339887498949, 2.4142135623730951};
      double a[3], ph[3], total = 0.0;
      for (int k = 0; k < 3; ++k) {
        a[k] = weight(rng);
        ph[k] = phase(rng);
        total += a[k];
      }
      const double gate_phase = phase(rng);
      for (std::size_t t = 0; t < spec.length; ++t) {
        const double tau = static_cast<double>(t) / len;
        double carrier = 0.0;
        for (int k = 0; k < 3; ++k) carrier += a[k] * std::sin(two_pi * freqs[k] * rate * tau + ph[k]);
        const double gate = 0.5 * (1.0 + std::tanh(3.0 * std::sin(two_pi * 0.75 * rate * tau + gate_phase)));
        sig.values[t] = spec.amplitude * (0.25 + 0.75 * gate) * carrier / total;
      }
      break;
    }
    case SignalKind::piecewise: {
      const auto knots = static_cast<std::size_t>(std::max(2.0, std::ceil(rate)));
      std::uniform_real_distribution<double> level(-spec.amplitude, spec.amplitude);
      std::vector<double> lv(knots + 1);
      for (auto& v : lv) v = level(rng);
      for (std::size_t t = 0; t < spec.length; ++t) {
        const double pos = static_cast<double>(t) / len * static_cast<double>(knots);
        const auto k = std::min(static_cast<std::size_t>(pos), knots - 1);
        const double frac = pos - static_cast<double>(k);
        sig.values[t] = lv[k] + frac * (lv[k + 1] - lv[k]);
      }
      break;
    }
  }
  sig.delta_cap = detail::max_increment(sig.values);
  return sig;
}

inline Signal generate_signal(const SignalSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  return generate_signal(spec, rng);
}

}  // namespace wsnest
