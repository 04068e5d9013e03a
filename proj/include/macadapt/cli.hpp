#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "macadapt/alloc_continuous.hpp"
#include "macadapt/alloc_discrete.hpp"
#include "macadapt/io.hpp"
#include "macadapt/partial_csi.hpp"
#include "macadapt/power_control.hpp"
#include "macadapt/verify.hpp"
#include "macadapt/weighted_region.hpp"

namespace macadapt::cli {

using io::RunConfig;

enum ExitCode : int {
  kOk = 0,
  kInvalidConfig = 2,
  kSolverFailure = 3,
  kNotConverged = 4,
  kVerificationFailed = 5,
};

/// What a command produced: named files (written under out_dir by run) and a
/// short human summary. Commands never touch the filesystem except to read a
/// configured law file.
struct CommandOutput {
  int exit_code = kOk;
  std::vector<std::pair<std::string, std::string>> files;
  std::string summary;

  const std::string* file(const std::string& name) const {
    for (const auto& [n, body] : files)
      if (n == name) return &body;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Shared solving

struct SumLaw {
  RateLaw law;
  std::vector<double> expected;
  double value = 0.0;
  bool discretized = false;
};

inline bool equal_weights(const MacInstance& inst) {
  for (std::size_t i = 1; i < inst.size(); ++i)
    if (inst.weight(i) != inst.weight(0)) return false;
  return true;
}

/// The optimal fixed-power law for the configured weights.
inline SumLaw solve_sumrate(const RunConfig& cfg) {
  const auto& inst = cfg.instance;
  if (inst.power_mode != PowerMode::fixed) throw InvalidInput("this command uses fixed powers; see power-opt");
  if (!equal_weights(inst)) {
    if (inst.size() != 2) throw InvalidInput("unequal weights are supported for two users only");
    auto r = weighted_sum_capacity(inst, inst.weights, cfg.weighted);
    return {std::move(r.law), std::move(r.expected), r.value, r.discretized};
  }
  if (cfg.rho && inst.size() != 2) throw InvalidInput("sumrate.rho applies to two users only");
  const double c = inst.weight(0);
  auto finish = [&](RateLaw law, std::vector<double> e, bool disc) {
    double v = 0.0;
    for (double x : e) v += c * x;
    return SumLaw{std::move(law), std::move(e), v, disc};
  };
  if (inst.all_discrete() || !continuous_path_applies(inst.users)) {
    bool disc = false;
    std::vector<FadingDistribution> users;
    for (const auto& u : inst.users) {
      disc = disc || !u.is_discrete();
      users.push_back(u.is_discrete() ? u : discretize_lower(u, cfg.weighted.fallback_delta));
    }
    auto grid = build_level_grid(users);
    auto law = cfg.rho ? allocate_two_user(grid, inst.powers, *cfg.rho, inst.log_base)
                       : allocate_multi_user(grid, inst.powers,
                                             cfg.base_rates.empty()
                                                 ? default_base_rates(grid, inst.powers, inst.log_base)
                                                 : cfg.base_rates,
                                             inst.log_base);
    RateLaw rl = disc ? RateLaw::floored(std::move(law)) : RateLaw(std::move(law));
    std::vector<double> e;
    for (std::size_t i = 0; i < inst.size(); ++i) e.push_back(rl.expected_rate(i, inst.users[i]));
    return finish(std::move(rl), std::move(e), disc);
  }
  if (cfg.rho) throw InvalidInput("sumrate.rho applies to discrete users only; use base_rates");
  auto law = tabulate_rate_law(inst, cfg.base_rates, cfg.weighted.nodes);
  auto e = law.expected_rates();
  return finish(RateLaw(std::move(law)), std::move(e), false);
}

/// Rate-law CSV on discrete instances, sampled-law CSV otherwise.
inline std::pair<std::string, std::string> law_file(const MacInstance& inst, const RateLaw& law) {
  if (inst.all_discrete()) return {"rate_law.csv", io::rate_law_csv(inst.users, strategy_on_original(law, inst).rates)};
  return {"sampled_law.csv", io::sampled_law_csv(inst.users, law)};
}

// ---------------------------------------------------------------------------
// Commands

inline CommandOutput cmd_sumrate(const RunConfig& cfg) {
  const auto& inst = cfg.instance;
  auto s = solve_sumrate(cfg);
  CommandOutput out;
  auto rep = io::report_header("sumrate", cfg);
  rep["value"] = s.value;
  rep["expected_rates"] = s.expected;
  std::vector<double> w;
  for (std::size_t i = 0; i < inst.size(); ++i) w.push_back(inst.weight(i));
  rep["weights"] = w;
  rep["discretized"] = s.discretized;
  if (equal_weights(inst)) rep["sum_upper_bound"] = inst.weight(0) * sum_capacity_upper_bound(inst);
  auto lf = law_file(inst, s.law);
  rep["law_file"] = lf.first;
  out.files.push_back(std::move(lf));

  if (!cfg.power_sweep.empty()) {
    io::CsvWriter csv({"power", "adaptive_sum", "equal_slot_tdma"});
    bool dominates = true;
    for (double p : cfg.power_sweep) {
      MacInstance q = inst;
      q.weights.clear();
      q.powers.assign(inst.size(), p);
      const double adaptive = sum_capacity_upper_bound(q);
      const double tdma = equal_slot_tdma(q);
      dominates = dominates && adaptive > tdma;
      csv.row(p, adaptive, tdma);
    }
    rep["power_sweep_strictly_dominates"] = dominates;
    out.files.emplace_back("sumrate_sweep.csv", csv.str());
  }
  out.files.emplace_back("report.json", io::dump(rep));
  out.summary = "weighted value " + io::fmt(s.value);
  return out;
}

inline CommandOutput cmd_region(const RunConfig& cfg) {
  auto rb = region_sweep(cfg.instance, cfg.region.grid(), cfg.weighted);
  CommandOutput out;
  auto rep = io::report_header("region", cfg);
  rep["points"] = rb.points.size();
  rep["convexity_violations"] = rb.convexity_violations;
  rep["max_convexity_violation"] = rb.max_convexity_violation;
  rep["discretized"] = rb.discretized;
  out.files.emplace_back("region.csv", io::region_csv(rb));
  out.files.emplace_back("report.json", io::dump(rep));
  out.summary = std::to_string(rb.points.size()) + " boundary points, " +
                std::to_string(rb.convexity_violations) + " convexity flags";
  return out;
}

inline CommandOutput cmd_region_partial(const RunConfig& cfg) {
  if (cfg.quantizers.size() != 2) throw InvalidInput("region-partial needs partial.quantizers for both users");
  const auto grid = cfg.region.grid();
  auto base = region_sweep(cfg.instance, grid, cfg.weighted);
  auto part = region_sweep_partial(cfg.instance, cfg.quantizers[0], cfg.quantizers[1], grid, cfg.weighted);
  // Containment at matching weights: the partial support function is never below the baseline's.
  double min_gain = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < part.points.size(); ++k)
    min_gain = std::min(min_gain, part.points[k].weighted_value - base.points[k].weighted_value);
  CommandOutput out;
  auto rep = io::report_header("region-partial", cfg);
  rep["points"] = part.points.size();
  rep["min_gain_over_baseline"] = min_gain;
  rep["contains_baseline"] = min_gain >= -std::max(cfg.tol, 1e-9);
  rep["convexity_violations"] = part.convexity_violations;
  rep["max_convexity_violation"] = part.max_convexity_violation;
  rep["discretized"] = part.discretized || base.discretized;
  out.files.emplace_back("region_partial.csv", io::region_csv(part));
  out.files.emplace_back("region_baseline.csv", io::region_csv(base));
  out.files.emplace_back("report.json", io::dump(rep));
  out.summary = "minimum gain over baseline " + io::fmt(min_gain);
  return out;
}

inline CommandOutput cmd_power_opt(const RunConfig& cfg) {
  MacInstance inst = cfg.instance;
  inst.power_mode = PowerMode::average;
  bool discretized = false;
  for (auto& u : inst.users) {
    if (u.is_discrete()) continue;
    u = discretize_lower(u, cfg.power_delta);
    discretized = true;
  }
  if (inst.size() != 2) throw InvalidInput("power control is supported for two users");
  const std::vector<double> w{inst.weight(0), inst.weight(1)};
  std::size_t not_converged = 0;

  auto main = optimize_power(inst, w, cfg.power);
  not_converged += main.converged ? 0 : 1;
  MacInstance fixed = inst;
  fixed.power_mode = PowerMode::fixed;
  const double fixed_value = weighted_sum_capacity(fixed, w).value;

  CommandOutput out;
  auto rep = io::report_header("power-opt", cfg);
  rep["weights"] = w;
  rep["discretized"] = discretized;
  rep["value"] = main.value;
  rep["expected_rates"] = main.expected;
  rep["kkt_residual"] = main.kkt_residual;
  rep["iterations"] = main.iterations;
  rep["converged"] = main.converged;
  rep["restart_value"] = main.restart_value;
  rep["fixed_power_value"] = fixed_value;
  bool monotone = true;
  std::vector<double> usage;
  for (std::size_t i = 0; i < 2; ++i) {
    monotone = monotone && monotonicity_check(inst.users[i], main.law.power[i]).ok;
    const auto& d = inst.users[i].as_discrete();
    double u = 0.0;
    for (std::size_t j = 0; j < d.states.size(); ++j) u += d.probs[j] * main.law.power[i][j];
    usage.push_back(u);
  }
  rep["monotone"] = monotone;
  rep["budget_usage"] = usage;
  out.files.emplace_back("power_law.csv", io::power_law_csv(inst.users, main.law));
  if (cfg.power.trace) out.files.emplace_back("trace.csv", io::trace_csv(main.trace));

  if (cfg.power_region_enabled) {
    PowerOptions po = cfg.power;
    po.trace = false;
    auto rb = sweep_with(
        [&](const std::vector<double>& wk, std::size_t direction) {
          PowerOptions o = po;
          o.tie_priority = direction - 1;
          auto r = optimize_power(inst, wk, o);
          not_converged += r.converged ? 0 : 1;
          struct Sample {
            std::vector<double> expected;
            double value;
            bool discretized;
          };
          return Sample{r.expected, r.value, false};
        },
        cfg.power_region.grid());
    // Mirror gap: zero for identical users, where direction 2 reflects direction 1.
    const std::size_t half = rb.points.size() / 2;
    double mirror = 0.0;
    for (std::size_t k = 0; k < half; ++k) {
      mirror = std::max(mirror, std::abs(rb.points[k].er1 - rb.points[half + k].er2));
      mirror = std::max(mirror, std::abs(rb.points[k].er2 - rb.points[half + k].er1));
    }
    rep["region_points"] = rb.points.size();
    rep["convexity_violations"] = rb.convexity_violations;
    rep["max_convexity_violation"] = rb.max_convexity_violation;
    rep["mirror_gap"] = mirror;
    out.files.emplace_back("power_region.csv", io::region_csv(rb));
  }

  if (!cfg.budget_sweep.empty()) {
    io::CsvWriter csv({"budget", "optimized", "waterfill_adaptive", "best_tdma", "best_tau", "ordered"});
    bool chain = true;
    PowerOptions po = cfg.power;
    po.trace = false;
    po.pins.clear();
    for (double p : cfg.budget_sweep) {
      MacInstance q = inst;
      q.powers.assign(2, p);
      auto r = optimize_power(q, w, po);
      not_converged += r.converged ? 0 : 1;
      const double wf = waterfill_rate_adaptation(q, w);
      const auto td = best_tdma(q, w);
      // The optimizer stops at a 1e-7 mapping norm; allow that much slack on the top link.
      const bool ok = r.value >= wf - 1e-7 && wf >= td.best_value - 1e-12;
      chain = chain && ok;
      csv.row(p, r.value, wf, td.best_value, td.best_tau, std::size_t(ok ? 1 : 0));
    }
    rep["dominance_chain_holds"] = chain;
    out.files.emplace_back("dominance.csv", csv.str());
  }
  rep["not_converged"] = not_converged;
  out.files.emplace_back("report.json", io::dump(rep));
  out.summary = "optimized value " + io::fmt(main.value) + ", kkt residual " + io::fmt(main.kkt_residual);
  if (not_converged > 0) {
    out.exit_code = kNotConverged;
    out.summary += "; " + std::to_string(not_converged) + " runs did not converge";
  }
  return out;
}

inline CommandOutput cmd_verify(const RunConfig& cfg) {
  const auto& inst = cfg.instance;
  CommandOutput out;
  auto rep = io::report_header("verify", cfg);
  OutageReport check;
  if (inst.all_discrete()) {
    DiscreteStrategy s;
    std::optional<SumLaw> solved;
    if (!cfg.law_file.empty()) {
      s = io::strategy_from_rate_law_file(cfg.law_file, inst);
    } else {
      solved = solve_sumrate(cfg);
      s = strategy_on_original(solved->law, inst);
    }
    check = exhaustive_outage_check(s, cfg.tol, inst.log_base);
    check.seed = cfg.seed;
    rep.update(io::outage_report_json(check));
    rep["mode"] = "exhaustive";
    // The law's weighted value may not exceed the LP optimum over all outage-free laws.
    std::vector<double> w;
    double law_value = 0.0;
    for (std::size_t i = 0; i < inst.size(); ++i) {
      w.push_back(inst.weight(i));
      for (std::size_t j = 0; j < s.rates[i].size(); ++j) law_value += w[i] * s.probs[i][j] * s.rates[i][j];
    }
    rep["law_value"] = law_value;
    if (macadapt::detail::tuple_count(inst.users, kMaxLpTuples + 1) <= kMaxLpTuples) {
      const double lp = lp_oracle_weighted_sum(inst, w).value;
      rep["lp_value"] = lp;
      if (law_value > lp + 1e-8) check.pass = false;
      if (solved && std::abs(law_value - lp) > 1e-8) check.pass = false;
      rep["pass"] = check.pass;
    }
  } else {
    if (!cfg.law_file.empty()) throw io::LawFileError("law files are supported for discrete instances only");
    auto solved = solve_sumrate(cfg);
    check = sampled_outage_check(
        inst.users, inst.powers, [&](std::size_t i, double h) { return solved.law.rate(i, h); }, cfg.samples,
        cfg.seed, cfg.tol, inst.log_base);
    rep.update(io::outage_report_json(check));
    rep["mode"] = "sampled";
  }
  rep["tol"] = cfg.tol;
  out.files.emplace_back("verify.json", io::dump(rep));
  out.summary = std::string(check.pass ? "pass" : "FAIL") + ", max violation " + io::fmt(check.max_violation) +
                " over " + std::to_string(check.n) + " tuples";
  if (!check.pass) out.exit_code = kVerificationFailed;
  return out;
}

inline CommandOutput cmd_simulate(const RunConfig& cfg) {
  const auto& inst = cfg.instance;
  std::vector<double> expected;
  SimResult sim;
  auto power = [&](std::size_t i, double) { return inst.powers[i]; };
  if (!cfg.law_file.empty()) {
    auto s = io::strategy_from_rate_law_file(cfg.law_file, inst);
    auto rate = [&](std::size_t i, double h) {
      const auto& st = s.states[i];
      return s.rates[i][std::size_t(std::lower_bound(st.begin(), st.end(), h) - st.begin())];
    };
    sim = simulate_blocks(inst.users, rate, power, cfg.samples, cfg.seed, cfg.tol, inst.log_base);
    for (std::size_t i = 0; i < inst.size(); ++i) {
      double e = 0.0;
      for (std::size_t j = 0; j < s.rates[i].size(); ++j) e += s.probs[i][j] * s.rates[i][j];
      expected.push_back(e);
    }
  } else {
    auto solved = solve_sumrate(cfg);
    sim = simulate_blocks(
        inst.users, [&](std::size_t i, double h) { return solved.law.rate(i, h); }, power, cfg.samples, cfg.seed,
        cfg.tol, inst.log_base);
    expected = solved.expected;
  }
  // Empirical means within two 95% half-widths (about 4 sigma) of the exact expectation.
  bool within = true;
  for (std::size_t i = 0; i < inst.size(); ++i)
    within = within && std::abs(sim.mean_rate[i] - expected[i]) <= 2.0 * sim.half_width[i] + 1e-12;
  const bool pass = sim.outages == 0 && within;
  CommandOutput out;
  auto rep = io::report_header("simulate", cfg);
  rep["pass"] = pass;
  rep["blocks"] = sim.blocks;
  rep["seed"] = sim.seed;
  rep["outages"] = sim.outages;
  rep["mean_rate"] = sim.mean_rate;
  rep["half_width"] = sim.half_width;
  rep["expected_rates"] = expected;
  rep["means_within_interval"] = within;
  out.files.emplace_back("simulate.json", io::dump(rep));
  out.summary = std::to_string(sim.outages) + " outages in " + std::to_string(sim.blocks) + " blocks";
  if (!pass) out.exit_code = kVerificationFailed;
  return out;
}

inline CommandOutput dispatch(const std::string& command, const RunConfig& cfg) {
  if (command == "sumrate") return cmd_sumrate(cfg);
  if (command == "region") return cmd_region(cfg);
  if (command == "region-partial") return cmd_region_partial(cfg);
  if (command == "power-opt") return cmd_power_opt(cfg);
  if (command == "verify") return cmd_verify(cfg);
  if (command == "simulate") return cmd_simulate(cfg);
  throw InvalidInput("unknown command " + command);
}

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"sumrate", "region", "region-partial", "power-opt", "verify",
                                              "simulate"};
  return names;
}

/// Loads the config, runs the command, writes its files under out_dir and
/// maps failures onto exit codes.
inline int run(const std::string& command, const std::filesystem::path& config, const io::Overrides& ov,
               std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  RunConfig cfg;
  try {
    cfg = io::load_config(config, ov);
  } catch (const std::exception& e) {
    err << "invalid config: " << e.what() << '\n';
    return kInvalidConfig;
  }
  CommandOutput out;
  try {
    out = dispatch(command, cfg);
  } catch (const io::LawFileError& e) {
    err << "verification failed: " << e.what() << '\n';
    return kVerificationFailed;
  } catch (const InvalidInput& e) {
    err << "invalid config: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const InvalidParameter& e) {
    err << "invalid config: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const std::exception& e) {
    err << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  }
  try {
    std::filesystem::create_directories(cfg.out_dir);
    for (const auto& [name, body] : out.files) {
      std::ofstream f(std::filesystem::path(cfg.out_dir) / name, std::ios::binary);
      f << body;
      if (!f) throw std::runtime_error("cannot write " + name);
    }
  } catch (const std::exception& e) {
    err << "output failure: " << e.what() << '\n';
    return kSolverFailure;
  }
  log << command << ": " << out.summary << '\n';
  for (const auto& f : out.files) log << "  wrote " << (std::filesystem::path(cfg.out_dir) / f.first).string() << '\n';
  return out.exit_code;
}

}  // namespace macadapt::cli
