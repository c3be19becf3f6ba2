#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfld/errors.hpp"
#include "mfld/ito_euler.hpp"
#include "mfld/meanfield_chain.hpp"
#include "mfld/toy_model.hpp"

namespace mfld::harness {

// Malformed or inconsistent run configuration.
class ConfigError : public DomainError {
 public:
  using DomainError::DomainError;
};

enum class Experiment { simulate, rate, sanov_check, decay_scan, identity_suite, lln_trend };
enum class OutputFormat { csv, svg, both };
enum class SystemKind { toy, chain, ito, iid };

inline Experiment parse_experiment(const std::string& s) {
  if (s == "simulate") return Experiment::simulate;
  if (s == "rate") return Experiment::rate;
  if (s == "sanov-check") return Experiment::sanov_check;
  if (s == "decay-scan") return Experiment::decay_scan;
  if (s == "identity-suite") return Experiment::identity_suite;
  if (s == "lln-trend") return Experiment::lln_trend;
  throw ConfigError("unknown experiment '" + s + "'");
}

inline OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "svg") return OutputFormat::svg;
  if (s == "both") return OutputFormat::both;
  throw ConfigError("unknown output format '" + s + "' (expected csv, svg or both)");
}

inline SystemKind parse_system(const std::string& s) {
  if (s == "toy") return SystemKind::toy;
  if (s == "chain") return SystemKind::chain;
  if (s == "ito") return SystemKind::ito;
  if (s == "iid") return SystemKind::iid;
  throw ConfigError("unknown system '" + s + "' (expected toy, chain, ito or iid)");
}

inline const char* system_name(SystemKind k) {
  switch (k) {
    case SystemKind::toy: return "toy";
    case SystemKind::chain: return "chain";
    case SystemKind::ito: return "ito";
    case SystemKind::iid: return "iid";
  }
  return "?";
}

struct Tolerances {
  double contraction = 1e-12;   // closed-form lift vs R(eta || psi(gamma0))
  double lift_grid = 1e-4;      // brute-force lift infimum
  double toy_forms = 1e-9;      // toy rate, both forms
  double rate_forms = 1e-4;     // staged rate, both forms
  double variational = 1e-6;    // Ito rate, both forms
  double telescope = 1e-12;     // Wiener relative entropy vs control energy
  double sanov_baseline = 1e-12;
};

struct ToySection {
  ToyModelSpec spec{DriftFunction::scaled_tanh(1.0), ToyModelSpec::Variant::standard, {}};
  std::size_t N = 1000;
  std::optional<std::uint64_t> seed;
  std::optional<GaussianMeasure> theta;
};

struct ChainSection {
  MeanFieldChainSpec spec;
  std::map<std::string, double> eta;  // path name -> weight, for `rate`
};

struct ItoSection {
  ItoSpec spec = ItoSpec::mean_reverting(1.0, 0.5, 1.0, 1.0);
  int K = 16;
  std::size_t N = 1000;
  std::optional<Eigen::VectorXd> control;  // constant control defining the `rate` target
  EulerGrid grid() const { return EulerGrid::over(spec.T(), K); }
};

struct RunConfig {
  Experiment experiment = Experiment::identity_suite;
  SystemKind system = SystemKind::toy;
  std::uint64_t seed = 0;
  std::vector<std::size_t> N;  // empty: experiment default
  std::size_t replications = 20;
  std::vector<double> sanov_mu{0.5, 0.5};
  bool mutate_psi = false;
  Tolerances tol;
  ToySection toy;
  ChainSection chain;
  ItoSection ito;
  std::filesystem::path out_dir = ".";
  OutputFormat format = OutputFormat::csv;

  RunConfig() {
    chain.spec.states = {"a", "b"};
    chain.spec.q = {0.8, 0.2};
    chain.spec.A = TransitionFamily::adoption(0.2, 0.5);
    chain.spec.T = 2;
  }

  std::uint64_t toy_seed() const { return toy.seed.value_or(seed); }

  std::vector<std::size_t> schedule() const {
    if (!N.empty()) return N;
    switch (experiment) {
      case Experiment::sanov_check: {
        std::vector<std::size_t> s;
        for (std::size_t n = 4; n <= 200; n += 4) s.push_back(n);
        return s;
      }
      case Experiment::decay_scan: return {20, 40, 60};
      case Experiment::lln_trend: return {100, 1000, 10000};
      default: return {};
    }
  }

  void validate() const {
    for (std::size_t i = 0; i < N.size(); ++i) {
      if (N[i] == 0) throw ConfigError("N schedule entries must be positive");
      if (i > 0 && N[i] <= N[i - 1]) throw ConfigError("N schedule must be strictly increasing");
    }
    if (replications == 0) throw ConfigError("replications must be positive");
    toy.spec.validate();
    chain.spec.validate();
    ito.grid().validate(ito.spec.T());
  }
};

namespace detail {

using nlohmann::json;

inline void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be a table");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
T get(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + " has the wrong type");
  }
}

inline Eigen::VectorXd vector_of(const json& j, const std::string& where) {
  auto v = get<std::vector<double>>(j, where);
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Eigen::MatrixXd matrix_of(const json& j, const std::string& where) {
  auto rows = get<std::vector<std::vector<double>>>(j, where);
  if (rows.empty()) throw ConfigError(where + " is empty");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ConfigError(where + " has ragged rows");
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

inline double number(const json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? get<double>(j.at(key), where + "." + key) : fallback;
}

inline void read_toy(const json& j, ToySection& toy) {
  allow_keys(j, "toy", {"b", "variant", "B", "N", "seed", "theta"});
  if (j.contains("b")) {
    const auto& b = j.at("b");
    allow_keys(b, "toy.b", {"kind", "scale"});
    toy.spec.b = DriftFunction::from_name(b.contains("kind") ? get<std::string>(b.at("kind"), "toy.b.kind") : "tanh",
                                          number(b, "scale", 1.0, "toy.b"));
  }
  if (j.contains("variant")) {
    const auto v = get<std::string>(j.at("variant"), "toy.variant");
    if (v == "standard") toy.spec.variant = ToyModelSpec::Variant::standard;
    else if (v == "indicator") toy.spec.variant = ToyModelSpec::Variant::indicator;
    else throw ConfigError("toy.variant must be standard or indicator");
  }
  if (j.contains("B"))
    for (const auto& iv : get<std::vector<std::vector<double>>>(j.at("B"), "toy.B")) {
      if (iv.size() != 2) throw ConfigError("toy.B intervals are [lo, hi] pairs");
      toy.spec.B.push_back({iv[0], iv[1]});
    }
  if (j.contains("N")) toy.N = get<std::size_t>(j.at("N"), "toy.N");
  if (j.contains("seed")) toy.seed = get<std::uint64_t>(j.at("seed"), "toy.seed");
  if (j.contains("theta")) {
    const auto& t = j.at("theta");
    allow_keys(t, "toy.theta", {"mean", "cov"});
    toy.theta = GaussianMeasure(vector_of(t.at("mean"), "toy.theta.mean"), matrix_of(t.at("cov"), "toy.theta.cov"));
  }
}

inline TransitionFamily read_family(const json& j) {
  if (!j.contains("builtin")) throw ConfigError("chain.A needs a builtin name");
  const auto name = get<std::string>(j.at("builtin"), "chain.A.builtin");
  if (name == "adoption") {
    allow_keys(j, "chain.A", {"builtin", "alpha", "beta"});
    return TransitionFamily::adoption(number(j, "alpha", 0.2, "chain.A"), number(j, "beta", 0.5, "chain.A"));
  }
  if (name == "constant") {
    allow_keys(j, "chain.A", {"builtin", "matrix"});
    return TransitionFamily::constant(matrix_of(j.at("matrix"), "chain.A.matrix"));
  }
  if (name == "affine") {
    allow_keys(j, "chain.A", {"builtin", "base", "slopes"});
    std::vector<Eigen::MatrixXd> slopes;
    for (const auto& s : j.at("slopes")) slopes.push_back(matrix_of(s, "chain.A.slopes"));
    return TransitionFamily::affine(matrix_of(j.at("base"), "chain.A.base"), slopes);
  }
  throw ConfigError("unknown transition builtin '" + name + "' (expected adoption, constant or affine)");
}

inline void read_chain(const json& j, ChainSection& chain) {
  allow_keys(j, "chain", {"states", "q", "T", "A", "eta"});
  if (j.contains("states")) chain.spec.states = get<std::vector<std::string>>(j.at("states"), "chain.states");
  if (j.contains("q")) chain.spec.q = get<std::vector<double>>(j.at("q"), "chain.q");
  if (j.contains("T")) chain.spec.T = get<int>(j.at("T"), "chain.T");
  if (j.contains("A")) chain.spec.A = read_family(j.at("A"));
  if (j.contains("eta")) chain.eta = get<std::map<std::string, double>>(j.at("eta"), "chain.eta");
}

inline void read_ito(const json& j, ItoSection& ito) {
  allow_keys(j, "ito", {"builtin", "kappa", "lambda", "sigma", "x0", "a", "B", "C", "S", "T", "K", "N", "control"});
  const double T = number(j, "T", ito.spec.T(), "ito");
  const std::string name = j.contains("builtin") ? get<std::string>(j.at("builtin"), "ito.builtin") : "mean_reverting";
  auto scalar_x0 = [&] { return j.contains("x0") ? vector_of(j.at("x0"), "ito.x0")(0) : 1.0; };
  if (name == "mean_reverting") {
    ito.spec = ItoSpec::mean_reverting(number(j, "kappa", 1.0, "ito"), number(j, "sigma", 0.5, "ito"), scalar_x0(), T);
  } else if (name == "sine_coupling") {
    ito.spec = ItoSpec::sine_coupling(number(j, "kappa", 1.0, "ito"), number(j, "lambda", 1.0, "ito"),
                                      number(j, "sigma", 0.5, "ito"), scalar_x0(), T);
  } else if (name == "brownian") {
    ito.spec = ItoSpec::brownian(j.contains("x0") ? vector_of(j.at("x0"), "ito.x0") : Eigen::VectorXd::Zero(1), T);
  } else if (name == "linear") {
    for (const char* k : {"a", "B", "C", "S", "x0"})
      if (!j.contains(k)) throw ConfigError(std::string("ito.linear needs ") + k);
    ito.spec = ItoSpec::linear(vector_of(j.at("a"), "ito.a"), matrix_of(j.at("B"), "ito.B"),
                               matrix_of(j.at("C"), "ito.C"), matrix_of(j.at("S"), "ito.S"),
                               vector_of(j.at("x0"), "ito.x0"), T);
  } else {
    throw ConfigError("unknown Ito builtin '" + name + "' (expected brownian, mean_reverting, sine_coupling or linear)");
  }
  if (j.contains("K")) ito.K = get<int>(j.at("K"), "ito.K");
  if (j.contains("N")) ito.N = get<std::size_t>(j.at("N"), "ito.N");
  if (j.contains("control")) ito.control = vector_of(j.at("control"), "ito.control");
}

inline void read_tolerances(const json& j, Tolerances& t) {
  allow_keys(j, "tolerances",
             {"contraction", "lift_grid", "toy_forms", "rate_forms", "variational", "telescope", "sanov_baseline"});
  t.contraction = number(j, "contraction", t.contraction, "tolerances");
  t.lift_grid = number(j, "lift_grid", t.lift_grid, "tolerances");
  t.toy_forms = number(j, "toy_forms", t.toy_forms, "tolerances");
  t.rate_forms = number(j, "rate_forms", t.rate_forms, "tolerances");
  t.variational = number(j, "variational", t.variational, "tolerances");
  t.telescope = number(j, "telescope", t.telescope, "tolerances");
  t.sanov_baseline = number(j, "sanov_baseline", t.sanov_baseline, "tolerances");
}

}  // namespace detail

/// Reads a JSON run configuration. Every key is optional; unknown keys are
/// rejected. Domain errors from the model builtins surface as ConfigError.
inline RunConfig parse_config(const std::string& text) {
  using nlohmann::json;
  RunConfig cfg;
  json j;
  try {
    j = text.empty() ? json::object() : json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    detail::allow_keys(j, "config",
                       {"experiment", "system", "seed", "N", "replications", "tolerances", "sanov", "toy", "chain",
                        "ito", "identity", "output"});
    if (j.contains("experiment")) cfg.experiment = parse_experiment(detail::get<std::string>(j.at("experiment"), "experiment"));
    if (j.contains("system")) cfg.system = parse_system(detail::get<std::string>(j.at("system"), "system"));
    if (j.contains("seed")) cfg.seed = detail::get<std::uint64_t>(j.at("seed"), "seed");
    if (j.contains("N")) cfg.N = detail::get<std::vector<std::size_t>>(j.at("N"), "N");
    if (j.contains("replications")) cfg.replications = detail::get<std::size_t>(j.at("replications"), "replications");
    if (j.contains("tolerances")) detail::read_tolerances(j.at("tolerances"), cfg.tol);
    if (j.contains("sanov")) {
      detail::allow_keys(j.at("sanov"), "sanov", {"mu"});
      if (j.at("sanov").contains("mu")) cfg.sanov_mu = detail::get<std::vector<double>>(j.at("sanov").at("mu"), "sanov.mu");
    }
    if (j.contains("toy")) detail::read_toy(j.at("toy"), cfg.toy);
    if (j.contains("chain")) detail::read_chain(j.at("chain"), cfg.chain);
    if (j.contains("ito")) detail::read_ito(j.at("ito"), cfg.ito);
    if (j.contains("identity")) {
      detail::allow_keys(j.at("identity"), "identity", {"mutate_psi"});
      if (j.at("identity").contains("mutate_psi"))
        cfg.mutate_psi = detail::get<bool>(j.at("identity").at("mutate_psi"), "identity.mutate_psi");
    }
    if (j.contains("output")) {
      detail::allow_keys(j.at("output"), "output", {"dir", "format"});
      if (j.at("output").contains("dir")) cfg.out_dir = detail::get<std::string>(j.at("output").at("dir"), "output.dir");
      if (j.at("output").contains("format"))
        cfg.format = parse_format(detail::get<std::string>(j.at("output").at("format"), "output.format"));
    }
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace mfld::harness
