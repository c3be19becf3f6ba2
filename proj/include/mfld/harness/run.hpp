#pragma once

#include <filesystem>
#include <ostream>
#include <sstream>
#include <string>

#include "mfld/harness/config.hpp"
#include "mfld/harness/experiments.hpp"
#include "mfld/harness/report.hpp"
#include "mfld/io.hpp"

namespace mfld::harness {

enum ExitCode : int { kAllPass = 0, kCheckFailed = 1, kConfigError = 2 };

namespace detail {

inline ReportPaths paths_for(const RunConfig& cfg, const std::string& stem, bool has_plot) {
  ReportPaths p;
  if (cfg.format != OutputFormat::svg) p.csv = cfg.out_dir / (stem + ".csv");
  if (cfg.format != OutputFormat::csv && has_plot) p.svg = cfg.out_dir / (stem + ".svg");
  return p;
}

inline void print_notes(std::ostream& log, const RateReport& r) {
  for (const auto& n : r.notes) log << "  " << n << '\n';
}

inline std::size_t first_or(const RunConfig& cfg, std::size_t fallback) {
  return cfg.N.empty() ? fallback : cfg.N.front();
}

inline PathMeasure<int> chain_target(const RunConfig& cfg) {
  const auto& spec = cfg.chain.spec;
  const auto paths = feasible_paths(spec);
  if (cfg.chain.eta.empty()) {
    // default target: halfway between the McKean-Vlasov law and uniform
    return mixture(chain_mckean_vlasov_law(spec), PathMeasure<int>::uniform(paths), 0.5);
  }
  std::vector<Path<int>> pts;
  std::vector<double> w;
  for (const auto& [name, weight] : cfg.chain.eta) {
    auto it = std::find_if(paths.begin(), paths.end(), [&](const Path<int>& p) { return spec.path_name(p) == name; });
    if (it == paths.end()) {
      // an unreachable but well-formed path is allowed; its rate is infinite
      Path<int> p;
      std::stringstream ss(name);
      std::string tok;
      while (std::getline(ss, tok, '.')) {
        auto s = std::find(spec.states.begin(), spec.states.end(), tok);
        if (s == spec.states.end()) throw ConfigError("chain.eta: unknown state '" + tok + "' in path '" + name + "'");
        p.push_back(static_cast<int>(s - spec.states.begin()));
      }
      if (p.size() != static_cast<std::size_t>(spec.T) + 1)
        throw ConfigError("chain.eta: path '" + name + "' has the wrong length");
      pts.push_back(p);
    } else {
      pts.push_back(*it);
    }
    w.push_back(weight);
  }
  try {
    return PathMeasure<int>::from_weights(pts, w);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("chain.eta: ") + e.what());
  }
}

// Law of the Euler scheme under the constant control c.
inline GaussianMeasure ito_controlled_target(const ItoSpec& spec, const EulerGrid& grid, const Eigen::VectorXd& c) {
  const auto d = spec.d();
  const Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(d, d) + spec.B() * grid.h;
  std::vector<Eigen::VectorXd> m{spec.x0()};
  for (int k = 0; k < grid.K; ++k)
    m.push_back(Phi * m.back() + (spec.a() + spec.C() * m.back()) * grid.h + spec.S() * c * grid.h);
  Eigen::VectorXd stacked(grid.K * d);
  for (int k = 1; k <= grid.K; ++k) stacked.segment((k - 1) * d, d) = m[static_cast<std::size_t>(k)];
  return GaussianMeasure(stacked, frozen_law(spec, grid, m).covariance());
}

inline int run_simulate(const RunConfig& cfg, std::ostream& log) {
  std::ostringstream os;
  std::string stem;
  switch (cfg.system) {
    case SystemKind::toy:
    case SystemKind::iid: {
      ToyModelSpec spec = cfg.toy.spec;
      if (cfg.system == SystemKind::iid) spec = {DriftFunction::constant(0.0), ToyModelSpec::Variant::standard, {}};
      const auto sim = toy_simulate(spec, cfg.toy.N, cfg.toy_seed());
      write_distribution(os, sim.empirical.to_distribution());
      stem = "simulate_" + std::string(system_name(cfg.system));
      log << "simulated " << cfg.toy.N << " toy particles\n";
      break;
    }
    case SystemKind::chain: {
      const std::size_t N = first_or(cfg, 100);
      const auto run = chain_simulate(cfg.chain.spec, N, cfg.seed);
      for (const auto& [p, c] : run.empirical.counts())
        os << cfg.chain.spec.path_name(p) << '\t' << format_real(static_cast<double>(c) / static_cast<double>(N)) << '\n';
      stem = "simulate_chain";
      log << "simulated " << N << " chains\n";
      break;
    }
    case SystemKind::ito: {
      const auto run = euler_simulate(cfg.ito.spec, cfg.ito.grid(), cfg.ito.N, cfg.seed);
      write_distribution(os, run.empirical.to_distribution());
      stem = "simulate_ito";
      log << "simulated " << cfg.ito.N << " Euler particles\n";
      break;
    }
  }
  const auto path = cfg.out_dir / (stem + ".txt");
  write_file(path, os.str());
  log << "wrote " << path.string() << '\n';
  return kAllPass;
}

inline int run_rate(const RunConfig& cfg, std::ostream& log) {
  RateReport report;
  report.title = "Rate function";
  switch (cfg.system) {
    case SystemKind::toy:
    case SystemKind::iid: {
      Eigen::Matrix2d cov;
      cov << 1.0, 1.0, 1.0, 2.0;
      const GaussianMeasure theta = cfg.toy.theta.value_or(GaussianMeasure(Eigen::Vector2d(1.0, 1.0), cov));
      const auto r = toy_rate_function(theta, cfg.toy.spec);
      const double gap = std::abs(r.re_minus_F - r.entropy_form);
      report.add({"toy", 0, r.re_minus_F, ExtendedReal::finite(r.entropy_form), gap, cfg.tol.toy_forms,
                  gap <= cfg.tol.toy_forms});
      break;
    }
    case SystemKind::chain: {
      const auto eta = chain_target(cfg);
      const auto rate = chain_rate_function(eta, cfg.chain.spec);
      report.add({"chain", 0, rate.is_infinite() ? std::numeric_limits<double>::infinity() : rate.value(), rate, 0.0,
                  0.0, true});
      break;
    }
    case SystemKind::ito: {
      const auto grid = cfg.ito.grid();
      if (!cfg.ito.spec.is_linear()) throw ConfigError("rate for Ito specs needs the linear builtins");
      const Eigen::VectorXd c = cfg.ito.control.value_or(Eigen::VectorXd::Ones(cfg.ito.spec.d1()));
      if (c.size() != cfg.ito.spec.d1()) throw ConfigError("ito.control has the wrong length");
      const auto target = ito_controlled_target(cfg.ito.spec, grid, c);
      const auto var = variational_upper_bound(target, cfg.ito.spec, grid);
      const auto re = ito_rate_re_form(target, cfg.ito.spec, grid);
      const double gap = mfld::harness::detail::deviation(var.value, re);
      report.add({"ito", 0, var.value.is_infinite() ? std::numeric_limits<double>::infinity() : var.value.value(), re,
                  gap, cfg.tol.variational, gap <= cfg.tol.variational});
      break;
    }
  }
  for (const auto& r : report.rows)
    log << r.instance << ": measured " << detail::fmt(r.measured) << ", rate " << detail::fmt(r.rate) << '\n';
  emit_reports(report, paths_for(cfg, "rate", false));
  return report.pass ? kAllPass : kCheckFailed;
}

inline int run_rate_report(const RunConfig& cfg, const RateReport& report, const std::string& stem,
                           const std::vector<Series>& series, const std::string& ylabel, std::ostream& log) {
  emit_reports(report, paths_for(cfg, stem, true), series, report.title, "N", ylabel);
  log << report.title << ": " << report.rows.size() << " rows, " << (report.pass ? "pass" : "FAIL") << '\n';
  print_notes(log, report);
  return report.pass ? kAllPass : kCheckFailed;
}

}  // namespace detail

/// Runs the configured experiment, writes its reports under cfg.out_dir and
/// returns the exit code (0 all checks pass, 1 a check failed). Config and
/// capacity problems propagate as exceptions.
inline int run_experiment(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  switch (cfg.experiment) {
    case Experiment::simulate: return detail::run_simulate(cfg, log);
    case Experiment::rate: return detail::run_rate(cfg, log);
    case Experiment::sanov_check: {
      const auto r = sanov_check(cfg.sanov_mu, cfg.schedule());
      return detail::run_rate_report(cfg, r, "sanov", gap_series(r), "gap", log);
    }
    case Experiment::decay_scan: {
      const auto r = meanfield_decay_scan(cfg.chain.spec, cfg.schedule());
      return detail::run_rate_report(cfg, r, "decay", gap_series(r), "gap", log);
    }
    case Experiment::identity_suite: {
      IdentityOptions opt;
      opt.seed = cfg.seed == 0 ? opt.seed : cfg.seed;
      opt.mutate_psi = cfg.mutate_psi;
      opt.tol_contraction = cfg.tol.contraction;
      opt.tol_lift_grid = cfg.tol.lift_grid;
      opt.tol_toy = cfg.tol.toy_forms;
      opt.tol_rate_forms = cfg.tol.rate_forms;
      opt.tol_variational = cfg.tol.variational;
      opt.tol_telescope = cfg.tol.telescope;
      opt.tol_sanov_baseline = cfg.tol.sanov_baseline;
      const auto report = identity_suite(opt);
      emit_reports(report, detail::paths_for(cfg, "identities", false));
      for (const auto& r : report.rows)
        log << (r.pass ? "pass " : "FAIL ") << r.identity << ": max deviation " << detail::fmt(r.max_deviation)
            << " (tolerance " << detail::fmt(r.tolerance) << ")\n";
      return report.pass() ? kAllPass : kCheckFailed;
    }
    case Experiment::lln_trend: {
      LlnOptions opt;
      switch (cfg.system) {
        case SystemKind::toy: opt.system = LlnOptions::System::toy; break;
        case SystemKind::iid: opt.system = LlnOptions::System::iid; break;
        case SystemKind::ito: opt.system = LlnOptions::System::ito; break;
        case SystemKind::chain: throw ConfigError("lln-trend supports the toy, iid and ito systems");
      }
      opt.toy = cfg.toy.spec;
      opt.ito = cfg.ito.spec;
      opt.K = cfg.ito.K;
      opt.schedule = cfg.schedule();
      opt.replications = cfg.replications;
      opt.seed = cfg.seed;
      const auto t = lln_trend(opt);
      return detail::run_rate_report(cfg, t.report, "lln", {t.series}, "bounded-Lipschitz distance", log);
    }
  }
  return kAllPass;
}

}  // namespace mfld::harness
