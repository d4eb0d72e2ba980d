#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <istream>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "wsnest/errors.hpp"
#include "wsnest/sim.hpp"

namespace wsnest {

/// Sweep axes of the bench command. Each signal entry is a freq_scale.
struct BenchSpec {
  std::vector<double> signals{1.0, 2.0, 4.0, 8.0, 16.0};
  std::vector<double> q_values{0.0, 0.1, 0.2, 0.3};
};

struct Config {
  SimConfig sim;
  BenchSpec bench;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) throw ConfigError(key + ": expected a number, got '" + s + "'");
  return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError(key + ": expected a nonnegative integer, got '" + s + "'");
  return v;
}

inline long parse_long(const std::string& key, const std::string& s) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError(key + ": expected an integer, got '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ' && c != '\t') {
      cur.push_back(c);
    }
  }
  if (!cur.empty() || !out.empty()) out.push_back(cur);
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F&& fmt) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt(v[i]);
  }
  return s;
}

template <class F>
auto wrap(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace detail

/// Applies one "section.key = value" setting. Unknown keys are errors.
inline void apply_setting(Config& cfg, const std::string& section, const std::string& key, const std::string& value) {
  using namespace detail;
  const std::string name = section + "." + key;
  auto& s = cfg.sim;
  auto num = [&] { return parse_double(name, value); };
  auto count = [&] { return static_cast<std::size_t>(parse_uint(name, value)); };

  if (section == "topology") {
    if (key == "family") return s.topology.family = wrap(name, [&] { return topology_family_from_string(value); }), void();
    if (key == "n") return s.topology.n = count(), void();
    if (key == "side") return s.topology.side = num(), void();
    if (key == "radius") return s.topology.radius = num(), void();
    if (key == "generators") {
      s.topology.generators.clear();
      for (const auto& g : split_list(value)) s.topology.generators.push_back(parse_long(name, g));
      return;
    }
    if (key == "edges_file") return s.topology.edges_file = value, void();
    if (key == "theta_mode") return s.topology.theta_mode = wrap(name, [&] { return theta_mode_from_string(value); }), void();
  } else if (section == "loss") {
    if (key == "q") return s.loss.q = num(), void();
    if (key == "jitter") return s.loss.jitter = num(), void();
    if (key == "symmetric") return s.loss.symmetric = parse_bool(name, value), void();
    if (key == "matrix_file") return s.loss.matrix_file = value, void();
  } else if (section == "signal") {
    if (key == "kind") return s.signal.kind = wrap(name, [&] { return signal_kind_from_string(value); }), void();
    if (key == "freq_scale") return s.signal.freq_scale = num(), void();
    if (key == "cycles") return s.signal.cycles = num(), void();
    if (key == "amplitude") return s.signal.amplitude = num(), void();
    if (key == "length") return s.signal.length = count(), void();
    if (key == "slope") return s.signal.slope = num(), void();
    if (key == "seed") return s.signal.seed = parse_uint(name, value), void();
  } else if (section == "filter") {
    if (key == "sigma2") return s.sigma2 = num(), void();
    if (key == "forgetting") return s.forgetting = num(), void();
    if (key == "bisection_tol") return s.bisection_tol = num(), void();
  } else if (section == "thresholds") {
    if (key == "gamma_max") {
      if (value == "auto") s.gamma_max.reset();
      else s.gamma_max = num();
      return;
    }
    if (key == "upsilon_db") return s.upsilon_db = num(), void();
    if (key == "delta_margin") return s.delta_margin = num(), void();
    if (key == "gamma_cap") return s.gamma_cap = num(), void();
    if (key == "tol") return s.threshold.tol = num(), void();
    if (key == "max_iter") return s.threshold.max_iter = count(), void();
  } else if (section == "sim") {
    if (key == "estimators") {
      s.estimators.clear();
      for (const auto& e : split_list(value)) s.estimators.push_back(wrap(name, [&] { return estimator_from_string(e); }));
      return;
    }
    if (key == "trials") return s.trials = count(), void();
    if (key == "warmup") return s.warmup = count(), void();
    if (key == "seed") return s.master_seed = parse_uint(name, value), void();
    if (key == "e1_laplacian") return s.e1_laplacian = wrap(name, [&] { return laplacian_kind_from_string(value); }), void();
    if (key == "record_estimates") return s.record_estimates = parse_bool(name, value), void();
  } else if (section == "bench") {
    auto nums = [&] {
      std::vector<double> v;
      for (const auto& x : split_list(value)) v.push_back(parse_double(name, x));
      return v;
    };
    if (key == "signals") return cfg.bench.signals = nums(), void();
    if (key == "q_values") return cfg.bench.q_values = nums(), void();
  } else if (section == "manifest") {
    return;  // provenance written by the tool; ignored on input
  }
  throw ConfigError("unknown config key '" + name + "'");
}

/// Reads INI text on top of the defaults.
inline Config parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  Config cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config key '" + section + "' is outside any section");
    for (const auto& [key, node] : body) apply_setting(cfg, section, key, node.data());
  }
  validate(cfg.sim);
  if (cfg.bench.signals.empty() || cfg.bench.q_values.empty()) throw ConfigError("bench axes must be nonempty");
  return cfg;
}

inline Config parse_config_text(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in);
}

/// Every key with its resolved value, in a fixed order.
inline void write_config(std::ostream& os, const Config& cfg) {
  using detail::format_double;
  const auto& s = cfg.sim;
  os << "[topology]\n"
     << "family = " << to_string(s.topology.family) << '\n'
     << "n = " << s.topology.n << '\n'
     << "side = " << format_double(s.topology.side) << '\n'
     << "radius = " << format_double(s.topology.radius) << '\n'
     << "generators = " << detail::join(s.topology.generators, [](long g) { return std::to_string(g); }) << '\n'
     << "edges_file = " << s.topology.edges_file << '\n'
     << "theta_mode = " << to_string(s.topology.theta_mode) << "\n\n";
  os << "[loss]\n"
     << "q = " << format_double(s.loss.q) << '\n'
     << "jitter = " << format_double(s.loss.jitter) << '\n'
     << "symmetric = " << (s.loss.symmetric ? "true" : "false") << '\n'
     << "matrix_file = " << s.loss.matrix_file << "\n\n";
  os << "[signal]\n"
     << "kind = " << to_string(s.signal.kind) << '\n'
     << "freq_scale = " << format_double(s.signal.freq_scale) << '\n'
     << "cycles = " << format_double(s.signal.cycles) << '\n'
     << "amplitude = " << format_double(s.signal.amplitude) << '\n'
     << "length = " << s.signal.length << '\n'
     << "slope = " << format_double(s.signal.slope) << '\n'
     << "seed = " << s.signal.seed << "\n\n";
  os << "[filter]\n"
     << "sigma2 = " << format_double(s.sigma2) << '\n'
     << "forgetting = " << format_double(s.forgetting) << '\n'
     << "bisection_tol = " << format_double(s.bisection_tol) << "\n\n";
  os << "[thresholds]\n"
     << "gamma_max = " << (s.gamma_max ? format_double(*s.gamma_max) : std::string("auto")) << '\n'
     << "upsilon_db = " << format_double(s.upsilon_db) << '\n'
     << "delta_margin = " << format_double(s.delta_margin) << '\n'
     << "gamma_cap = " << format_double(s.gamma_cap) << '\n'
     << "tol = " << format_double(s.threshold.tol) << '\n'
     << "max_iter = " << s.threshold.max_iter << "\n\n";
  os << "[sim]\n"
     << "estimators = " << detail::join(s.estimators, [](EstimatorKind k) { return to_string(k); }) << '\n'
     << "trials = " << s.trials << '\n'
     << "warmup = " << s.warmup << '\n'
     << "seed = " << s.master_seed << '\n'
     << "e1_laplacian = " << to_string(s.e1_laplacian) << '\n'
     << "record_estimates = " << (s.record_estimates ? "true" : "false") << "\n\n";
  os << "[bench]\n"
     << "signals = " << detail::join(cfg.bench.signals, format_double) << '\n'
     << "q_values = " << detail::join(cfg.bench.q_values, format_double) << '\n';
}

inline std::string config_text(const Config& cfg) {
  std::ostringstream os;
  write_config(os, cfg);
  return os.str();
}

}  // namespace wsnest
