#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "wsnest/bounds.hpp"
#include "wsnest/config.hpp"
#include "wsnest/sim.hpp"
#include "wsnest/thresholds.hpp"
#include "wsnest/topology.hpp"
#include "wsnest/version.hpp"

namespace wsnest::app {

namespace fs = std::filesystem;
using detail::format_double;

inline std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

inline void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
}

/// manifest.ini: the resolved config plus provenance. Feeding it back as a
/// config reproduces the outputs.
inline void write_manifest(const fs::path& dir, const std::string& command, const std::string& invocation,
                           const Config& cfg, const std::vector<std::string>& outputs) {
  auto out = open_output(dir / "manifest.ini");
  out << "[manifest]\n"
      << "command = " << command << '\n'
      << "invocation = " << invocation << '\n'
      << "version = " << kVersion << '\n'
      << "outputs = " << detail::join(outputs, [](const std::string& s) { return s; }) << "\n\n";
  write_config(out, cfg);
}

inline double mean_iterations(const std::vector<std::size_t>& its) {
  if (its.empty()) return 0.0;
  double s = 0.0;
  for (auto v : its) s += static_cast<double>(v);
  return s / static_cast<double>(its.size());
}

/// Topology of trial 0, the same graph `run` starts with.
inline Topology trial_topology(const Config& cfg) {
  return build_topology(cfg.sim.topology, mix_seed(trial_seed(cfg.sim.master_seed, 0), 1));
}

inline std::vector<std::string> cmd_topo(const Config& cfg, const fs::path& dir, std::ostream& log,
                                         const std::string& invocation = {}) {
  prepare_dir(dir);
  const Topology topo = trial_topology(cfg);
  {
    auto out = open_output(dir / "topology.txt");
    write_edge_list(out, topo);
  }
  const auto st = neighborhood_stats(topo);
  {
    auto out = open_output(dir / "stats.csv");
    out << "n,edges,mean_neighborhood,min_neighborhood,max_neighborhood,connected\n"
        << topo.size() << ',' << topo.edges().size() << ',' << format_double(st.mean) << ',' << st.min << ','
        << st.max << ',' << (topo.connected() ? 1 : 0) << '\n';
  }
  log << "nodes " << topo.size() << ", edges " << topo.edges().size() << ", neighborhood mean "
      << format_double(st.mean) << " min " << st.min << " max " << st.max
      << (topo.connected() ? "" : ", disconnected") << '\n';
  std::vector<std::string> outputs{"topology.txt", "stats.csv"};
  write_manifest(dir, "topo", invocation, cfg, outputs);
  return outputs;
}

struct ThresholdRun {
  ThresholdSolution solution;
  std::vector<double> residuals;
};

/// Thresholds for the trial-0 topology. With `realized`, the coupling sets
/// come from one sampled loss realization instead of the full graph.
inline ThresholdRun solve_thresholds(const Config& cfg, bool realized) {
  const Topology topo = trial_topology(cfg);
  const std::uint64_t seed = trial_seed(cfg.sim.master_seed, 0);
  std::vector<TwoHopSet> theta;
  if (realized) {
    const LossModel model = build_loss_model(cfg.sim.loss, topo, mix_seed(seed, 2));
    std::mt19937_64 rng(mix_seed(seed, 3));
    theta = two_hop_sets(sample_realization(model, rng, cfg.sim.loss.symmetric), cfg.sim.topology.theta_mode);
  } else {
    theta = two_hop_sets(topo, cfg.sim.topology.theta_mode);
  }
  const double gmax = resolve_gamma_max(cfg.sim, generate_signal(cfg.sim.signal).delta_cap);
  ThresholdRun r;
  r.solution = fixed_point_solve(theta, gmax, cfg.sim.threshold);
  r.residuals = constraint_residuals(r.solution.thresholds, theta);
  return r;
}

inline std::vector<std::string> cmd_thresholds(const Config& cfg, bool realized, const fs::path& dir, std::ostream& log,
                                               const std::string& invocation = {}) {
  prepare_dir(dir);
  const ThresholdRun r = solve_thresholds(cfg, realized);
  {
    auto out = open_output(dir / "psi.csv");
    write_psi_csv(out, r.solution.thresholds);
  }
  log << "gamma_max " << format_double(r.solution.thresholds.gamma_max) << ", iterations " << r.solution.iterations
      << ", residual " << format_double(r.solution.residual) << '\n';
  std::vector<std::string> outputs{"psi.csv"};
  write_manifest(dir, realized ? "thresholds --realized" : "thresholds", invocation, cfg, outputs);
  return outputs;
}

inline void write_summary_row(std::ostream& out, const SimReport& rep) {
  const auto& inv = rep.invariants;
  out << format_double(rep.gamma_max) << ',' << format_double(rep.delta_cap) << ','
      << format_double(rep.mean_neighborhood) << ',' << rep.disconnected_trials << ','
      << format_double(mean_iterations(rep.threshold_iterations)) << ',' << format_double(inv.max_weight_sum_error)
      << ',' << format_double(inv.max_norm_excess) << ',' << format_double(inv.max_gamma_excess) << ','
      << inv.multiplier_checks << ',' << inv.multiplier_violations << ',' << inv.rejoins << '\n';
}

inline constexpr const char* kSummaryHeader =
    "gamma_max,delta_cap,mean_neighborhood,disconnected_trials,mean_threshold_iterations,max_weight_sum_error,"
    "max_norm_excess,max_gamma_excess,multiplier_checks,multiplier_violations,rejoins";

inline std::vector<std::string> cmd_run(const Config& cfg, std::size_t jobs, const fs::path& dir, std::ostream& log,
                                        const std::string& invocation = {}) {
  prepare_dir(dir);
  const SimReport rep = monte_carlo(cfg.sim, jobs);
  std::vector<std::string> outputs;
  {
    auto out = open_output(dir / "report.csv");
    out << "estimator,q,mse_mean,mse_var,chi,bias_norm\n";
    for (const auto& e : rep.estimators)
      out << to_string(e.kind) << ',' << format_double(rep.q) << ',' << format_double(e.mse_mean) << ','
          << format_double(e.mse_var) << ',' << (e.kind == EstimatorKind::Ep ? std::string() : format_double(e.chi))
          << ',' << format_double(e.bias_norm) << '\n';
    outputs.push_back("report.csv");
  }
  {
    auto out = open_output(dir / "summary.csv");
    out << kSummaryHeader << '\n';
    write_summary_row(out, rep);
    outputs.push_back("summary.csv");
  }
  if (!rep.gamma_trace_max.empty()) {
    auto out = open_output(dir / "trace_gamma.csv");
    out << "t,gamma_K\n";
    for (std::size_t t = 0; t < rep.gamma_trace_max.size(); ++t)
      out << (t + 1) << ',' << format_double(rep.gamma_trace_max[t]) << '\n';
    outputs.push_back("trace_gamma.csv");
  }
  {
    auto out = open_output(dir / "trace_bias.csv");
    out << "t,estimator,bias_norm\n";
    for (const auto& e : rep.estimators)
      for (std::size_t t = 0; t < e.bias_trace.size(); ++t)
        out << t << ',' << to_string(e.kind) << ',' << format_double(e.bias_trace[t]) << '\n';
    outputs.push_back("trace_bias.csv");
  }
  if (!rep.recorded.empty()) {
    auto out = open_output(dir / "trace_estimates.csv");
    out << "t,d,estimator,node,x\n";
    for (const auto& e : rep.recorded)
      for (std::size_t t = 0; t < e.estimates.size(); ++t)
        for (Eigen::Index i = 0; i < e.estimates[t].size(); ++i)
          out << t << ',' << format_double(rep.signal[t]) << ',' << to_string(e.kind) << ',' << (i + 1) << ','
              << format_double(e.estimates[t](i)) << '\n';
    outputs.push_back("trace_estimates.csv");
  }
  if (!rep.psi.empty()) {
    auto out = open_output(dir / "psi.csv");
    write_psi_csv(out, ThresholdVector{rep.psi, rep.gamma_max});
    outputs.push_back("psi.csv");
  }
  log << "gamma_max " << format_double(rep.gamma_max) << ", delta " << format_double(rep.delta_cap) << ", trials "
      << rep.trials << '\n';
  for (const auto& e : rep.estimators)
    log << to_string(e.kind) << ": mse " << format_double(e.mse_mean) << " (var " << format_double(e.mse_var) << ")"
        << (e.kind == EstimatorKind::Ep ? std::string() : ", chi " + format_double(e.chi)) << '\n';
  write_manifest(dir, "run", invocation, cfg, outputs);
  return outputs;
}

struct BenchCell {
  double signal = 1.0;
  double q = 0.0;
  SimReport report;
};

/// The signal x loss sweep; every cell shares the master seed, so cells
/// differ only in the swept quantity.
inline std::vector<BenchCell> run_bench(const Config& cfg, std::size_t jobs) {
  std::vector<BenchCell> cells;
  for (double f : cfg.bench.signals)
    for (double q : cfg.bench.q_values) {
      SimConfig c = cfg.sim;
      c.signal.freq_scale = f;
      c.loss.q = q;
      c.record_estimates = false;
      cells.push_back({f, q, monte_carlo(c, jobs)});
    }
  return cells;
}

inline std::vector<std::string> cmd_bench(const Config& cfg, std::size_t jobs, const fs::path& dir, std::ostream& log,
                                          const std::string& invocation = {}) {
  prepare_dir(dir);
  const auto cells = run_bench(cfg, jobs);
  {
    auto out = open_output(dir / "report.csv");
    out << "estimator,signal,q,mse_mean,mse_var,chi,bias_norm\n";
    for (const auto& c : cells)
      for (const auto& e : c.report.estimators)
        out << to_string(e.kind) << ',' << format_double(c.signal) << ',' << format_double(c.q) << ','
            << format_double(e.mse_mean) << ',' << format_double(e.mse_var) << ','
            << (e.kind == EstimatorKind::Ep ? std::string() : format_double(e.chi)) << ','
            << format_double(e.bias_norm) << '\n';
  }
  {
    auto out = open_output(dir / "summary.csv");
    out << "signal,q," << kSummaryHeader << '\n';
    for (const auto& c : cells) {
      out << format_double(c.signal) << ',' << format_double(c.q) << ',';
      write_summary_row(out, c.report);
    }
  }
  {
    auto out = open_output(dir / "trace_gamma.csv");
    out << "signal,q,t,gamma_K\n";
    for (const auto& c : cells)
      for (std::size_t t = 0; t < c.report.gamma_trace_max.size(); ++t)
        out << format_double(c.signal) << ',' << format_double(c.q) << ',' << (t + 1) << ','
            << format_double(c.report.gamma_trace_max[t]) << '\n';
  }
  for (const auto& c : cells) {
    log << "signal " << format_double(c.signal) << " q " << format_double(c.q) << ':';
    for (const auto& e : c.report.estimators) log << ' ' << to_string(e.kind) << '=' << format_double(e.mse_mean);
    log << '\n';
  }
  std::vector<std::string> outputs{"report.csv", "summary.csv", "trace_gamma.csv"};
  write_manifest(dir, "bench", invocation, cfg, outputs);
  return outputs;
}

/// Figure grids: first variance factor over (gamma_max, N) and the
/// identical-link factor over (q, m).
inline std::vector<std::string> cmd_bounds_grid(const Config& cfg, const fs::path& dir, std::ostream& log,
                                                const std::string& invocation = {}) {
  prepare_dir(dir);
  double worst = 0.0;
  {
    auto out = open_output(dir / "first_factor.csv");
    out << "gamma_max,n,factor\n";
    for (int g = 50; g < 100; ++g)
      for (std::size_t n = 2; n <= 100; ++n) {
        const double gm = g / 100.0;
        const double f = bounds::variance_first_factor(n, gm);
        worst = std::max(worst, f);
        out << format_double(gm) << ',' << n << ',' << format_double(f) << '\n';
      }
  }
  {
    auto out = open_output(dir / "q_factor.csv");
    out << "q,m,factor\n";
    for (int q = 0; q <= 30; ++q)
      for (std::size_t m = 1; m <= 20; ++m) {
        const double qq = q / 100.0;
        out << format_double(qq) << ',' << m << ',' << format_double(bounds::uniform_q_factor(qq, m)) << '\n';
      }
  }
  log << "largest first factor on the grid " << format_double(worst) << '\n';
  std::vector<std::string> outputs{"first_factor.csv", "q_factor.csv"};
  write_manifest(dir, "bounds grid", invocation, cfg, outputs);
  return outputs;
}

struct BoundsQuery {
  std::size_t n_total = 20;
  std::size_t neighborhood_size = 7;
  double gamma_max = 0.9;
  double sigma2 = 1.5;
  double delta = 0.1;
  double q = 0.1;
  std::vector<double> p_vector;  // overrides q when nonempty
};

inline std::vector<std::pair<std::string, double>> evaluate_bounds(const BoundsQuery& b) {
  std::vector<double> p = b.p_vector;
  if (p.empty()) p.assign(b.neighborhood_size - 1, 1.0 - b.q);
  return {
      {"first_factor", bounds::variance_first_factor(b.n_total, b.gamma_max)},
      {"expected_inverse_count", bounds::expected_inverse_count(p)},
      {"benchmark_variance", bounds::benchmark_variance(p, b.sigma2)},
      {"variance_upper_bound",
       bounds::variance_upper_bound({b.n_total, p.size() + 1, b.gamma_max, b.sigma2, b.delta, p})},
      {"multiplier_sup_bound", bounds::multiplier_sup_bound(b.n_total, b.gamma_max, b.sigma2)},
      {"asymptotic_bias_bound", bounds::asymptotic_bias_bound(b.delta, b.n_total, b.gamma_max)},
  };
}

inline std::vector<std::string> cmd_bounds_eval(const Config& cfg, const BoundsQuery& b, const fs::path& dir,
                                                std::ostream& log, const std::string& invocation = {}) {
  prepare_dir(dir);
  const auto rows = evaluate_bounds(b);
  {
    auto out = open_output(dir / "bounds.csv");
    out << "quantity,value\n";
    for (const auto& [k, v] : rows) out << k << ',' << format_double(v) << '\n';
  }
  for (const auto& [k, v] : rows) log << k << ' ' << format_double(v) << '\n';
  std::vector<std::string> outputs{"bounds.csv"};
  write_manifest(dir, "bounds eval", invocation, cfg, outputs);
  return outputs;
}

}  // namespace wsnest::app
