#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "wsnest/baselines.hpp"
#include "wsnest/bounds.hpp"
#include "wsnest/channel.hpp"
#include "wsnest/errors.hpp"
#include "wsnest/filter.hpp"
#include "wsnest/signal.hpp"
#include "wsnest/thresholds.hpp"
#include "wsnest/topology.hpp"

namespace wsnest {

enum class EstimatorKind { Ep, E1, E2, E3, E4 };

inline std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::Ep: return "Ep";
    case EstimatorKind::E1: return "E1";
    case EstimatorKind::E2: return "E2";
    case EstimatorKind::E3: return "E3";
    case EstimatorKind::E4: return "E4";
  }
  return "?";
}

inline EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "Ep") return EstimatorKind::Ep;
  if (s == "E1") return EstimatorKind::E1;
  if (s == "E2") return EstimatorKind::E2;
  if (s == "E3") return EstimatorKind::E3;
  if (s == "E4") return EstimatorKind::E4;
  throw std::invalid_argument("unknown estimator '" + s + "'");
}

inline const std::vector<EstimatorKind>& all_estimators() {
  static const std::vector<EstimatorKind> all{EstimatorKind::Ep, EstimatorKind::E1, EstimatorKind::E2,
                                              EstimatorKind::E3, EstimatorKind::E4};
  return all;
}

enum class TopologyFamily { geometric, line, cayley, star, complete, file };

inline std::string to_string(TopologyFamily f) {
  switch (f) {
    case TopologyFamily::geometric: return "geometric";
    case TopologyFamily::line: return "line";
    case TopologyFamily::cayley: return "cayley";
    case TopologyFamily::star: return "star";
    case TopologyFamily::complete: return "complete";
    case TopologyFamily::file: return "file";
  }
  return "?";
}

inline TopologyFamily topology_family_from_string(const std::string& s) {
  if (s == "geometric") return TopologyFamily::geometric;
  if (s == "line") return TopologyFamily::line;
  if (s == "cayley") return TopologyFamily::cayley;
  if (s == "star") return TopologyFamily::star;
  if (s == "complete") return TopologyFamily::complete;
  if (s == "file") return TopologyFamily::file;
  throw std::invalid_argument("unknown topology family '" + s + "'");
}

struct TopologySpec {
  TopologyFamily family = TopologyFamily::geometric;
  std::size_t n = 20;
  double side = 20.0;
  double radius = 1.7 * std::sqrt(20.0);
  std::vector<long> generators{1, 3, 4};  // cayley: expanded to {0, +-g}
  std::string edges_file;                 // family = file
  ThetaMode theta_mode = ThetaMode::two_hop;
};

struct LossSpec {
  double q = 0.1;
  double jitter = 0.05;  // link q drawn once in [q - j, q + j]; j is capped at q
  bool symmetric = false;
  std::string matrix_file;  // explicit dense p matrix; replaces q and jitter when set
};

struct SimConfig {
  TopologySpec topology;
  LossSpec loss;
  SignalSpec signal;
  double sigma2 = 1.5;
  double upsilon_db = 0.0;
  double delta_margin = 0.05;          // Delta used for gamma_max is the realized one inflated by this
  std::optional<double> gamma_max;     // overrides the bias-power rule
  double gamma_cap = 0.999;
  std::vector<EstimatorKind> estimators = all_estimators();
  std::size_t trials = 30;
  std::size_t warmup = 70;
  std::uint64_t master_seed = 1;
  LaplacianKind e1_laplacian = LaplacianKind::normalized;
  double forgetting = 0.96;
  double bisection_tol = 1e-10;
  ThresholdOptions threshold;
  bool record_estimates = true;  // keep full per-step estimates of trial 0
};

inline void validate(const SimConfig& c) {
  if (c.trials < 1) throw ConfigError("trials must be >= 1");
  if (c.warmup >= c.signal.length) throw ConfigError("warmup must be shorter than the signal length");
  if (c.sigma2 < 0.0) throw ConfigError("sigma2 must be nonnegative");
  if (!(c.forgetting > 0.0 && c.forgetting <= 1.0)) throw ConfigError("forgetting must lie in (0,1]");
  if (!(c.loss.q >= 0.0 && c.loss.q <= 1.0)) throw ConfigError("q must lie in [0,1]");
  if (c.loss.jitter < 0.0) throw ConfigError("jitter must be nonnegative");
  if (c.gamma_max && !(*c.gamma_max > 0.0 && *c.gamma_max < 1.0)) throw ConfigError("gamma_max must lie in (0,1)");
  if (!(c.gamma_cap > 0.0 && c.gamma_cap < 1.0)) throw ConfigError("gamma_cap must lie in (0,1)");
  if (c.estimators.empty()) throw ConfigError("at least one estimator is required");
  if (c.topology.n < 1) throw ConfigError("topology needs n >= 1");
}

// splitmix64 finalizer; derives independent stream seeds from (seed, salt).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial) {
  return mix_seed(master_seed, 0x7472ULL + trial);
}

inline Topology build_topology(const TopologySpec& spec, std::uint64_t seed) {
  switch (spec.family) {
    case TopologyFamily::geometric: return build_geometric(spec.n, spec.side, spec.radius, seed);
    case TopologyFamily::line: return build_line(spec.n);
    case TopologyFamily::cayley: {
      const auto gens = symmetric_generators(spec.generators);
      return build_cayley(spec.n, gens);
    }
    case TopologyFamily::star: {
      Topology t(spec.n);
      for (NodeId j = 1; j < spec.n; ++j) t.connect(0, j);
      return t;
    }
    case TopologyFamily::complete: {
      Topology t(spec.n);
      for (NodeId i = 0; i < spec.n; ++i)
        for (NodeId j = i + 1; j < spec.n; ++j) t.connect(i, j);
      return t;
    }
    case TopologyFamily::file: {
      std::ifstream in(spec.edges_file);
      if (!in) throw ConfigError("cannot open edge list '" + spec.edges_file + "'");
      return read_edge_list(in);
    }
  }
  throw ConfigError("unknown topology family");
}

inline LossModel build_loss_model(const LossSpec& spec, const Topology& topo, std::uint64_t seed) {
  if (!spec.matrix_file.empty()) {
    std::ifstream in(spec.matrix_file);
    if (!in) throw ConfigError("cannot open loss matrix '" + spec.matrix_file + "'");
    LossModel m = read_loss_model(in, topo);
    if (m.size() != topo.size()) throw ConfigError("loss matrix size does not match the topology");
    return m;
  }
  return LossModel::jittered(topo, spec.q, std::min(spec.jitter, spec.q), seed);
}

/// gamma_max from the bias-power rule with the realized Delta inflated by
/// the configured margin, capped below 1; or the explicit override.
inline double resolve_gamma_max(const SimConfig& c, double realized_delta) {
  if (c.gamma_max) return *c.gamma_max;
  const double upsilon = std::pow(10.0, c.upsilon_db / 10.0);
  const double g = bounds::gamma_max_from_bias_power(upsilon, realized_delta * (1.0 + c.delta_margin));
  return std::clamp(g, 1e-6, c.gamma_cap);
}

/// Mean over steps t >= warmup and over nodes of (x_i(t) - d(t))^2.
inline double mse(const std::vector<Eigen::VectorXd>& estimates, const std::vector<double>& truth, std::size_t warmup) {
  if (warmup >= estimates.size()) throw std::invalid_argument("warmup must be shorter than the trace");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t t = warmup; t < estimates.size(); ++t) {
    acc += (estimates[t].array() - truth[t]).square().sum();
    count += static_cast<std::size_t>(estimates[t].size());
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

/// chi = (MSE(E_i) - MSE(E_p)) / MSE(E_i).
inline double improvement_factor(double mse_baseline, double mse_proposed) {
  return (mse_baseline - mse_proposed) / mse_baseline;
}

struct EstimatorTrial {
  EstimatorKind kind = EstimatorKind::Ep;
  double mse = 0.0;
  Eigen::VectorXd mean_error;  // per node, averaged over t >= warmup
  std::vector<Eigen::VectorXd> errors;     // x(t) - d(t) per step
  std::vector<Eigen::VectorXd> estimates;  // only when recorded
};

struct InvariantStats {
  double max_weight_sum_error = 0.0;  // |sum(k + h) - 1|
  double max_norm_excess = -std::numeric_limits<double>::infinity();  // ||k||^2 - psi_i
  double max_gamma_excess = -std::numeric_limits<double>::infinity(); // gamma(K o phi) - gamma_max
  std::size_t multiplier_checks = 0;
  std::size_t multiplier_violations = 0;
  std::size_t rejoins = 0;

  void merge(const InvariantStats& o) {
    max_weight_sum_error = std::max(max_weight_sum_error, o.max_weight_sum_error);
    max_norm_excess = std::max(max_norm_excess, o.max_norm_excess);
    max_gamma_excess = std::max(max_gamma_excess, o.max_gamma_excess);
    multiplier_checks += o.multiplier_checks;
    multiplier_violations += o.multiplier_violations;
    rejoins += o.rejoins;
  }
};

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double gamma_max = 0.0;
  std::size_t threshold_iterations = 0;
  std::vector<double> psi;
  NeighborhoodStats neighborhoods;
  bool connected = true;
  std::vector<EstimatorTrial> estimators;
  std::vector<double> gamma_trace;  // gamma(K(t) o phi_t) of Ep, t >= 1
  InvariantStats invariants;
};

/// Spectral norm via the largest eigenvalue of K K^T.
inline double spectral_norm(const Eigen::MatrixXd& k) {
  if (k.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k * k.transpose(), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

/// One seeded trial: a fresh topology, loss model and noise sequence, with
/// every enabled estimator driven by the same losses and measurements.
inline TrialResult run_trial(const SimConfig& cfg, const Signal& signal, std::size_t trial_index) {
  validate(cfg);
  const std::uint64_t seed = trial_seed(cfg.master_seed, trial_index);
  const Topology topo = build_topology(cfg.topology, mix_seed(seed, 1));
  const std::size_t n = topo.size();
  const LossModel model = build_loss_model(cfg.loss, topo, mix_seed(seed, 2));
  std::mt19937_64 channel_rng(mix_seed(seed, 3));
  std::mt19937_64 noise_rng(mix_seed(seed, 4));
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  const double sigma = std::sqrt(cfg.sigma2);

  TrialResult res;
  res.trial = trial_index;
  res.seed = seed;
  res.neighborhoods = neighborhood_stats(topo);
  res.connected = topo.connected();
  res.gamma_max = resolve_gamma_max(cfg, signal.delta_cap);

  std::vector<std::vector<NodeId>> hood(n);
  for (NodeId i = 0; i < n; ++i) hood[i] = topo.neighborhood(i);

  const bool want_ep = std::find(cfg.estimators.begin(), cfg.estimators.end(), EstimatorKind::Ep) != cfg.estimators.end();
  ThresholdVector psi;
  if (want_ep) {
    const auto theta = two_hop_sets(topo, cfg.topology.theta_mode);
    const auto sol = fixed_point_solve(theta, res.gamma_max, cfg.threshold);
    psi = sol.thresholds;
    res.threshold_iterations = sol.iterations;
    res.psi = psi.psi;
  }
  const double mult_bound = bounds::multiplier_sup_bound(n, res.gamma_max, cfg.sigma2);

  const std::size_t steps = signal.values.size();
  auto measure = [&](double d) {
    Eigen::VectorXd u(n);
    for (NodeId i = 0; i < n; ++i) u(i) = d + (sigma > 0.0 ? sigma * unit_normal(noise_rng) : 0.0);
    return u;
  };

  LossRealization phi = sample_realization(model, channel_rng, cfg.loss.symmetric);
  Eigen::VectorXd u = measure(signal.values[0]);

  const std::size_t n_est = cfg.estimators.size();
  std::vector<Eigen::VectorXd> x(n_est, u);
  std::vector<std::vector<Eigen::VectorXd>> traces(n_est);
  for (auto& tr : traces) {
    tr.reserve(steps);
    tr.push_back(u);
  }

  std::vector<NodeState> states;
  if (want_ep) {
    states.reserve(n);
    for (NodeId i = 0; i < n; ++i) {
      const auto sup = phi.support(i);
      states.push_back(init_state(i, hood[i], sup, u, cfg.sigma2));
    }
  }

  Eigen::MatrixXd k_mat = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t t = 1; t < steps; ++t) {
    phi = sample_realization(model, channel_rng, cfg.loss.symmetric);
    u = measure(signal.values[t]);
    std::vector<std::vector<NodeId>> support(n);
    for (NodeId i = 0; i < n; ++i) support[i] = phi.support(i);

    for (std::size_t e = 0; e < n_est; ++e) {
      const Eigen::VectorXd& prev = x[e];
      Eigen::VectorXd next(n);
      switch (cfg.estimators[e]) {
        case EstimatorKind::Ep: {
          k_mat.setZero();
          for (NodeId i = 0; i < n; ++i) {
            FilterParams params{cfg.sigma2, psi.psi[i], cfg.bisection_tol, cfg.forgetting};
            FilterStepInfo info;
            try {
              info = filter_step(states[i], params, hood[i], support[i], prev, u);
            } catch (const SingularBlock& err) {
              throw SingularBlock("step " + std::to_string(t) + ", node " + std::to_string(i + 1) + ": " + err.what());
            } catch (const BisectionFailure& err) {
              throw BisectionFailure("step " + std::to_string(t) + ", node " + std::to_string(i + 1) + ": " +
                                     err.what());
            }
            next(i) = states[i].x;
            k_mat.row(i) = states[i].k.transpose();
            auto& inv = res.invariants;
            inv.max_weight_sum_error = std::max(inv.max_weight_sum_error, std::abs(info.weight_sum - 1.0));
            inv.max_norm_excess = std::max(inv.max_norm_excess, info.k_norm2 - psi.psi[i]);
            inv.rejoins += info.rejoined;
            if (info.max_support_diag <= cfg.sigma2) {
              ++inv.multiplier_checks;
              if (!(info.max_eig_loaded < mult_bound)) ++inv.multiplier_violations;
            }
          }
          const double g = spectral_norm(k_mat);
          res.gamma_trace.push_back(g);
          res.invariants.max_gamma_excess = std::max(res.invariants.max_gamma_excess, g - res.gamma_max);
          break;
        }
        case EstimatorKind::E1: {
          const auto [K, H] = laplacian_weights(phi, cfg.e1_laplacian);
          next = K * prev + H * u;
          break;
        }
        case EstimatorKind::E2:
        case EstimatorKind::E3:
        case EstimatorKind::E4: {
          const BaselineKind kind = cfg.estimators[e] == EstimatorKind::E2   ? BaselineKind::E2
                                    : cfg.estimators[e] == EstimatorKind::E3 ? BaselineKind::E3
                                                                             : BaselineKind::E4;
          for (NodeId i = 0; i < n; ++i) {
            const Weights w = baseline_weights(kind, phi, i);
            next(i) = update_estimate(w.k, w.h, prev, u);
          }
          break;
        }
      }
      x[e] = next;
      traces[e].push_back(std::move(next));
    }
  }

  res.estimators.resize(n_est);
  for (std::size_t e = 0; e < n_est; ++e) {
    auto& et = res.estimators[e];
    et.kind = cfg.estimators[e];
    et.mse = mse(traces[e], signal.values, cfg.warmup);
    et.errors.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) et.errors.push_back(traces[e][t].array() - signal.values[t]);
    et.mean_error = Eigen::VectorXd::Zero(n);
    for (std::size_t t = cfg.warmup; t < steps; ++t) et.mean_error += et.errors[t];
    et.mean_error /= static_cast<double>(steps - cfg.warmup);
    if (cfg.record_estimates && trial_index == 0) et.estimates = std::move(traces[e]);
  }
  return res;
}

struct EstimatorSummary {
  EstimatorKind kind = EstimatorKind::Ep;
  std::vector<double> mse_per_trial;
  double mse_mean = 0.0;
  double mse_var = 0.0;  // unbiased sample variance across trials (0 for one trial)
  double chi = 0.0;      // improvement of Ep over this estimator; NaN when Ep is absent
  Eigen::VectorXd mean_error;  // per node, averaged over trials
  double bias_norm = 0.0;      // norm of mean_error
  std::vector<double> bias_trace;  // per step, norm of the trial-averaged error vector
};

struct SimReport {
  double gamma_max = 0.0;
  double delta_cap = 0.0;
  double q = 0.0;
  std::size_t trials = 0;
  std::vector<EstimatorSummary> estimators;
  std::vector<double> gamma_trace_max;  // per step, max over trials
  std::vector<std::size_t> threshold_iterations;
  double mean_neighborhood = 0.0;
  std::size_t disconnected_trials = 0;
  InvariantStats invariants;
  std::vector<double> signal;
  std::vector<EstimatorTrial> recorded;  // trial 0 estimates when requested
  std::vector<double> psi;               // thresholds of trial 0

  const EstimatorSummary* find(EstimatorKind k) const {
    for (const auto& e : estimators)
      if (e.kind == k) return &e;
    return nullptr;
  }
};

/// chi_i for every baseline summary, recomputed from the stored MSE means.
inline void improvement_factors(SimReport& report) {
  const EstimatorSummary* ep = report.find(EstimatorKind::Ep);
  for (auto& e : report.estimators)
    e.chi = ep ? improvement_factor(e.mse_mean, ep->mse_mean) : std::numeric_limits<double>::quiet_NaN();
}

/// Merge trial results in trial order.
inline SimReport aggregate(const SimConfig& cfg, const Signal& signal, std::vector<TrialResult> trials) {
  SimReport rep;
  rep.trials = trials.size();
  rep.delta_cap = signal.delta_cap;
  rep.q = cfg.loss.q;
  rep.signal = signal.values;
  if (trials.empty()) return rep;
  rep.gamma_max = trials.front().gamma_max;
  rep.psi = trials.front().psi;
  const std::size_t n_est = cfg.estimators.size();
  rep.estimators.resize(n_est);
  for (std::size_t e = 0; e < n_est; ++e) {
    auto& s = rep.estimators[e];
    s.kind = cfg.estimators[e];
    s.mean_error = Eigen::VectorXd::Zero(trials.front().estimators[e].mean_error.size());
    for (const auto& tr : trials) {
      s.mse_per_trial.push_back(tr.estimators[e].mse);
      s.mean_error += tr.estimators[e].mean_error;
    }
    s.mean_error /= static_cast<double>(trials.size());
    s.bias_norm = s.mean_error.norm();
    const std::size_t steps = trials.front().estimators[e].errors.size();
    s.bias_trace.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(s.mean_error.size());
      for (const auto& tr : trials) acc += tr.estimators[e].errors[t];
      s.bias_trace[t] = acc.norm() / static_cast<double>(trials.size());
    }
    double sum = 0.0;
    for (double v : s.mse_per_trial) sum += v;
    s.mse_mean = sum / static_cast<double>(s.mse_per_trial.size());
    double ss = 0.0;
    for (double v : s.mse_per_trial) ss += (v - s.mse_mean) * (v - s.mse_mean);
    s.mse_var = s.mse_per_trial.size() > 1 ? ss / static_cast<double>(s.mse_per_trial.size() - 1) : 0.0;
  }
  improvement_factors(rep);

  double nb = 0.0;
  for (const auto& tr : trials) {
    rep.threshold_iterations.push_back(tr.threshold_iterations);
    nb += tr.neighborhoods.mean;
    if (!tr.connected) ++rep.disconnected_trials;
    rep.invariants.merge(tr.invariants);
    if (rep.gamma_trace_max.size() < tr.gamma_trace.size()) rep.gamma_trace_max.resize(tr.gamma_trace.size(), 0.0);
    for (std::size_t t = 0; t < tr.gamma_trace.size(); ++t)
      rep.gamma_trace_max[t] = std::max(rep.gamma_trace_max[t], tr.gamma_trace[t]);
  }
  rep.mean_neighborhood = nb / static_cast<double>(trials.size());
  if (cfg.record_estimates) rep.recorded = std::move(trials.front().estimators);
  return rep;
}

/// Runs cfg.trials independent trials on up to `jobs` threads. Trial seeds
/// depend only on (master_seed, trial index), so the report does not depend
/// on scheduling.
inline SimReport monte_carlo(const SimConfig& cfg, std::size_t jobs = 1) {
  validate(cfg);
  const Signal signal = generate_signal(cfg.signal);
  std::vector<TrialResult> results(cfg.trials);
  jobs = std::max<std::size_t>(1, std::min(jobs, cfg.trials));
  if (jobs == 1) {
    for (std::size_t k = 0; k < cfg.trials; ++k) results[k] = run_trial(cfg, signal, k);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < cfg.trials; k = next++) {
          try {
            results[k] = run_trial(cfg, signal, k);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  return aggregate(cfg, signal, std::move(results));
}

}  // namespace wsnest
