#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "wsnest/app.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;  // "section.key" -> value

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  std::string out = "out";
};

// Registers a string option that becomes a config override when given.
void override_option(CLI::App* cmd, Overrides& ov, const std::string& flag, const std::string& key,
                     const std::string& help) {
  cmd->add_option_function<std::string>(flag, [&ov, key](const std::string& v) { ov.emplace_back(key, v); }, help);
}

void topology_options(CLI::App* cmd, Overrides& ov) {
  override_option(cmd, ov, "--family", "topology.family", "geometric | line | cayley | star | complete | file");
  override_option(cmd, ov, "--n", "topology.n", "number of nodes");
  override_option(cmd, ov, "--side", "topology.side", "square side (geometric)");
  override_option(cmd, ov, "--radius", "topology.radius", "connection radius (geometric)");
  override_option(cmd, ov, "--gen", "topology.generators", "generators, comma separated (cayley)");
  override_option(cmd, ov, "--edges", "topology.edges_file", "edge list file (family file)");
  override_option(cmd, ov, "--theta-mode", "topology.theta_mode", "two_hop | neighborhood");
}

wsnest::Config resolve(const Common& common, const Overrides& ov) {
  wsnest::Config cfg = common.config_path.empty() ? wsnest::Config{} : wsnest::load_config(common.config_path);
  for (const auto& [name, value] : ov) {
    const auto dot = name.find('.');
    wsnest::apply_setting(cfg, name.substr(0, dot), name.substr(dot + 1), value);
  }
  if (common.seed) cfg.sim.master_seed = *common.seed;
  wsnest::validate(cfg.sim);
  return cfg;
}

std::string invocation(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed minimum-variance estimation over lossy sensor networks"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", wsnest::kVersion);

  Common common;
  Overrides ov;
  app.add_option("--config", common.config_path, "INI config (a manifest.ini also works)");
  app.add_option("--seed", common.seed, "master seed");
  app.add_option("--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", common.out, "output directory");

  auto* topo = app.add_subcommand("topo", "build a topology and report neighborhood statistics");
  topology_options(topo, ov);

  bool realized = false;
  auto* thr = app.add_subcommand("thresholds", "solve the per-node thresholds");
  topology_options(thr, ov);
  override_option(thr, ov, "--gamma-max", "thresholds.gamma_max", "explicit gamma_max");
  override_option(thr, ov, "--q", "loss.q", "mean loss probability (with --realized)");
  thr->add_flag("--realized", realized, "use the coupling sets of one sampled loss realization");

  auto sim_options = [&](CLI::App* cmd) {
    cmd->add_option("config", common.config_path, "INI config or manifest");
    override_option(cmd, ov, "--trials", "sim.trials", "Monte Carlo trials");
    override_option(cmd, ov, "--estimators", "sim.estimators", "subset of Ep,E1,E2,E3,E4");
    override_option(cmd, ov, "--signal", "signal.kind", "multisine | piecewise | constant | ramp");
    override_option(cmd, ov, "--freq-scale", "signal.freq_scale", "signal frequency multiplier");
    override_option(cmd, ov, "--length", "signal.length", "steps");
    override_option(cmd, ov, "--sigma2", "filter.sigma2", "measurement noise variance");
    override_option(cmd, ov, "--gamma-max", "thresholds.gamma_max", "explicit gamma_max or auto");
    override_option(cmd, ov, "--warmup", "sim.warmup", "steps excluded from the MSE");
    override_option(cmd, ov, "--q", "loss.q", "mean loss probability");
  };
  auto* run = app.add_subcommand("run", "Monte Carlo run of one configuration");
  sim_options(run);
  auto* bench = app.add_subcommand("bench", "signal x loss sweep");
  sim_options(bench);

  auto* bnd = app.add_subcommand("bounds", "closed-form bounds");
  bnd->require_subcommand(1);
  auto* grid = bnd->add_subcommand("grid", "figure grids over (gamma_max, N) and (q, m)");
  wsnest::app::BoundsQuery query;
  auto* eval = bnd->add_subcommand("eval", "evaluate every bound at one point");
  eval->add_option("--n", query.n_total, "network size N");
  eval->add_option("--m", query.neighborhood_size, "closed neighborhood size")->check(CLI::PositiveNumber);
  eval->add_option("--gamma-max", query.gamma_max, "gamma_max");
  eval->add_option("--sigma2", query.sigma2, "noise variance");
  eval->add_option("--delta", query.delta, "signal increment bound");
  eval->add_option("--q", query.q, "identical link loss probability");
  eval->add_option("--p", query.p_vector, "per-link success probabilities (overrides --q and --m)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string inv = invocation(argc, argv);
  try {
    const wsnest::Config cfg = resolve(common, ov);
    if (*topo) wsnest::app::cmd_topo(cfg, common.out, std::cout, inv);
    else if (*thr) wsnest::app::cmd_thresholds(cfg, realized, common.out, std::cout, inv);
    else if (*run) wsnest::app::cmd_run(cfg, common.jobs, common.out, std::cout, inv);
    else if (*bench) wsnest::app::cmd_bench(cfg, common.jobs, common.out, std::cout, inv);
    else if (*grid) wsnest::app::cmd_bounds_grid(cfg, common.out, std::cout, inv);
    else if (*eval) wsnest::app::cmd_bounds_eval(cfg, query, common.out, std::cout, inv);
  } catch (const wsnest::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const wsnest::NonConvergence& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const wsnest::BisectionFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const wsnest::SingularBlock& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
