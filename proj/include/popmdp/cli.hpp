#pragma once

// Command implementations behind the popmdp executable. Each command returns a
// RunReport; rendering and exit-code mapping live in run_command so the same
// code path is exercised by tests and by the binary.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "popmdp/builtin_specs.hpp"
#include "popmdp/errors.hpp"
#include "popmdp/io.hpp"
#include "popmdp/lq_solver.hpp"
#include "popmdp/market.hpp"
#include "popmdp/montecarlo.hpp"
#include "popmdp/mv_solver.hpp"
#include "popmdp/population_engine.hpp"
#include "popmdp/version.hpp"

namespace popmdp::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitResource = 4;

inline int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Input: return kExitInput;
    case ErrorCategory::Numeric: return kExitNumeric;
    case ErrorCategory::Resource: return kExitResource;
  }
  return kExitInput;
}

/// 12 significant digits; negative zero prints as 0.
inline std::string fmt(double x) {
  if (x == 0.0) return "0";
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// Replaces every float in the document by its 12-significant-digit value.
inline json round_floats(const json& j) {
  if (j.is_number_float()) {
    const double x = j.get<double>();
    if (!std::isfinite(x)) return fmt(x);
    return std::strtod(fmt(x).c_str(), nullptr);
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(round_floats(v));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = round_floats(it.value());
    return out;
  }
  return j;
}

struct Options {
  std::string model;
  std::string mu0;
  std::optional<double> x0;
  std::string policy;
  std::string method;
  double lambda = 1.0;
  std::string ell = "1/26";
  int n_max = 50;
  std::size_t paths = 100'000;
  std::uint64_t seed = 0;
  bool antithetic = false;
  unsigned threads = 1;
  std::size_t family_size = 5;
  double spread = 0.1;
  bool snapshots = false;
  bool json = false;
  bool csv = false;
  bool timings = false;
  std::string out;
};

struct RunReport {
  std::string command;
  json inputs = json::object();
  json outputs = json::object();
  std::optional<double> seconds;  ///< wall time, included only on request
  std::string text;               ///< human-readable table
  std::string csv;                ///< machine CSV, empty when the command has none

  json to_json() const {
    json out = {{"tool", "popmdp"}, {"version", std::string(kVersion)}, {"command", command},
                {"inputs", inputs}, {"outputs", outputs}};
    if (seconds) out["timings"] = {{"seconds", *seconds}};
    return round_floats(out);
  }
};

namespace detail {

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

inline std::string vec_text(const Eigen::VectorXd& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v(i));
  return out + "]";
}

/// Dirac at --x0 (default 0) or the measure in --mu0; giving both is an error.
inline DiscreteMeasure initial_law(const Options& o) {
  if (!o.mu0.empty() && o.x0) throw Error(ErrorCode::InvalidArgument, "give either --x0 or --mu0, not both");
  if (!o.mu0.empty()) return io::measure_from_json(io::load_json_file(o.mu0));
  return DiscreteMeasure::dirac(o.x0.value_or(0.0));
}

inline json initial_law_json(const DiscreteMeasure& mu) {
  if (is_dirac(mu)) return {{"x0", mu.point(0)}};
  return {{"mu0", io::measure_to_json(mu)}};
}

inline void require_model(const Options& o) {
  if (o.model.empty()) throw Error(ErrorCode::InvalidArgument, "--model is required");
}

inline SolutionKind parse_method(const std::string& m) {
  if (m == "precommit") return SolutionKind::PreCommitment;
  if (m == "equilibrium") return SolutionKind::Equilibrium;
  if (m == "population") return SolutionKind::Population;
  throw Error(ErrorCode::InvalidArgument, "unknown method \"" + m + "\" (precommit, equilibrium, population)");
}

/// Accepts "p/q" or a decimal.
inline double parse_ratio(const std::string& s) {
  const auto parse = [&](const std::string& part) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &used);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "cannot parse number \"" + s + "\"");
    }
    if (used != part.size()) throw Error(ErrorCode::ParseError, "cannot parse number \"" + s + "\"");
    return v;
  };
  const auto slash = s.find('/');
  if (slash == std::string::npos) return parse(s);
  const double den = parse(s.substr(slash + 1));
  if (den == 0.0) throw Error(ErrorCode::BadEll, "zero denominator");
  return parse(s.substr(0, slash)) / den;
}

inline std::string rules_text(const std::vector<AffineRule>& rules) {
  std::string out = pad("stage", 7) + pad("form", 8) + pad("kappa", 20) + pad("slope", 20) + pad("intercept", 20) + "direction\n";
  for (std::size_t n = 0; n < rules.size(); ++n) {
    const auto& r = rules[n];
    const bool target = r.form() == AffineRule::Form::Target;
    out += pad(std::to_string(n), 7) + pad(target ? "target" : "linear", 8) + pad(target ? fmt(r.kappa()) : "-", 20) +
           pad(fmt(r.slope()), 20) + pad(fmt(r.intercept()), 20) + vec_text(r.direction()) + "\n";
  }
  return out;
}

inline std::string rules_csv(const std::vector<AffineRule>& rules) {
  std::string out = "stage,form,kappa,slope,intercept,direction\n";
  for (std::size_t n = 0; n < rules.size(); ++n) {
    const auto& r = rules[n];
    const bool target = r.form() == AffineRule::Form::Target;
    std::string dir;
    for (Eigen::Index i = 0; i < r.direction().size(); ++i) dir += (i ? ";" : "") + fmt(r.direction()(i));
    out += std::to_string(n) + "," + (target ? "target" : "linear") + "," + (target ? fmt(r.kappa()) : "") + "," +
           fmt(r.slope()) + "," + fmt(r.intercept()) + "," + dir + "\n";
  }
  return out;
}

inline std::string measures_text(const std::vector<DiscreteMeasure>& ms) {
  std::string out = pad("stage", 7) + pad("mean", 20) + pad("variance", 20) + "support\n";
  for (std::size_t n = 0; n < ms.size(); ++n)
    out += pad(std::to_string(n), 7) + pad(fmt(mean(ms[n])), 20) + pad(fmt(variance(ms[n])), 20) + std::to_string(ms[n].size()) + "\n";
  return out;
}

inline std::string kv(const std::string& key, const std::string& value) { return pad(key, 16) + value + "\n"; }

inline MVSolution solve_mv(const MVProblem& p, SolutionKind kind) {
  switch (kind) {
    case SolutionKind::PreCommitment: return precommit_policy(p);
    case SolutionKind::Equilibrium: return equilibrium_policy(p);
    case SolutionKind::Population: return population_solve(p);
  }
  return population_solve(p);
}

}  // namespace detail

inline RunReport cmd_solve_mv(const Options& o) {
  detail::require_model(o);
  const auto kind = detail::parse_method(o.method.empty() ? "population" : o.method);
  const auto model = io::market_from_json(io::load_json_file(o.model));
  auto p = make_mv_problem(model, o.lambda, detail::initial_law(o));
  const MVSolution sol = detail::solve_mv(p, kind);

  RunReport r;
  r.command = "solve-mv";
  r.inputs = {{"model", o.model}, {"market", io::market_to_json(model)}, {"lambda", o.lambda},
              {"method", std::string(to_string(kind))}};
  r.inputs.update(detail::initial_law_json(p.mu0));
  r.outputs = io::solution_to_json(sol, o.snapshots);
  r.outputs["ell"] = json::array();
  r.outputs["d"] = p.moments.d_sequence();
  for (int k = 1; k <= p.moments.horizon(); ++k) r.outputs["ell"].push_back(p.moments.ell(k));

  r.text = detail::kv("command", "solve-mv") + detail::kv("method", std::string(to_string(kind))) +
           detail::kv("lambda", fmt(o.lambda)) + detail::kv("horizon", std::to_string(model.horizon())) +
           detail::kv("value", fmt(sol.value)) + "\nrules\n" + detail::rules_text(sol.rules);
  if (!sol.measures.empty()) r.text += "\nmeasures\n" + detail::measures_text(sol.measures);
  r.csv = detail::rules_csv(sol.rules);
  return r;
}

inline RunReport cmd_solve_lq(const Options& o) {
  detail::require_model(o);
  auto doc = io::load_json_file(o.model);
  LQModel m = io::lq_from_json(doc);
  if (o.x0 || !o.mu0.empty()) {
    const DiscreteMeasure mu0 = detail::initial_law(o);
    m = make_lq_model(m.b, m.d, m.sigma, m.horizon, m.noise, mu0);
  }
  const LQSolution sol = lq_solve(m);

  RunReport r;
  r.command = "solve-lq";
  r.inputs = {{"model", o.model}, {"lq", io::lq_to_json(m)}};
  r.outputs = {{"value", sol.forward.value},
               {"beta", sol.backward.beta},
               {"means", sol.forward.means},
               {"stage_values", sol.forward.values},
               {"rules", io::rules_to_json(sol.forward.rules)}};
  json coefficients = json::array();
  for (const auto& g : sol.backward.generators) coefficients.push_back(g.coefficient);
  r.outputs["coefficients"] = coefficients;

  r.text = detail::kv("command", "solve-lq") + detail::kv("horizon", std::to_string(m.horizon)) +
           detail::kv("J0", fmt(sol.forward.value));
  if (sol.has_equilibrium) {
    r.outputs["equilibrium"] = {{"value", sol.equilibrium.value},
                                {"alpha", sol.equilibrium.alpha},
                                {"gamma", sol.equilibrium.gamma},
                                {"rules", io::rules_to_json(sol.equilibrium.rules)}};
    r.text += detail::kv("Ve0", fmt(sol.equilibrium.value)) + detail::kv("gamma0", fmt(sol.equilibrium.gamma.front()));
  } else {
    r.outputs["equilibrium"] = nullptr;
    r.text += detail::kv("Ve0", "n/a (needs unit noise variance and a point-mass start)");
  }
  r.text += "\n" + detail::pad("stage", 7) + detail::pad("beta", 20) + detail::pad("mean", 20) + detail::pad("J_n", 20) + "action\n";
  for (int n = 0; n <= m.horizon; ++n) {
    const auto i = static_cast<std::size_t>(n);
    r.text += detail::pad(std::to_string(n), 7) + detail::pad(fmt(sol.backward.beta[i]), 20) +
              detail::pad(fmt(sol.forward.means[i]), 20) + detail::pad(fmt(sol.forward.values[i]), 20) +
              (n < m.horizon ? fmt(sol.forward.rules[i].intercept()) : "-") + "\n";
  }
  r.csv = "stage,beta,mean,J,action\n";
  for (int n = 0; n <= m.horizon; ++n) {
    const auto i = static_cast<std::size_t>(n);
    r.csv += std::to_string(n) + "," + fmt(sol.backward.beta[i]) + "," + fmt(sol.forward.means[i]) + "," +
             fmt(sol.forward.values[i]) + "," + (n < m.horizon ? fmt(sol.forward.rules[i].intercept()) : "") + "\n";
  }
  return r;
}

inline RunReport cmd_figure1(const Options& o) {
  const double ell = detail::parse_ratio(o.ell);
  const auto rows = figure1_rows(ell, o.lambda, o.n_max);
  RunReport r;
  r.command = "figure1";
  r.inputs = {{"ell", ell}, {"ell_text", o.ell}, {"lambda", o.lambda}, {"Nmax", o.n_max}};
  json arr = json::array();
  r.csv = "N,Vo,Ve,gap\n";
  for (const auto& row : rows) {
    arr.push_back({{"N", row.horizon}, {"Vo", row.precommit}, {"Ve", row.equilibrium}, {"gap", row.gap}});
    r.csv += std::to_string(row.horizon) + "," + fmt(row.precommit) + "," + fmt(row.equilibrium) + "," + fmt(row.gap) + "\n";
  }
  r.outputs = {{"rows", arr}};
  r.text = r.csv;
  return r;
}

namespace detail {

inline json estimate_json(const Estimate& e) { return {{"value", e.value}, {"stderr", e.std_error}, {"paths", e.n}}; }

inline std::string estimate_text(const Estimate& e, const std::optional<double>& closed) {
  std::string out = kv("estimate", fmt(e.value)) + kv("stderr", fmt(e.std_error)) + kv("paths", std::to_string(e.n));
  if (closed) {
    out += kv("closed form", fmt(*closed));
    if (e.std_error > 0.0) out += kv("z", fmt((e.value - *closed) / e.std_error));
  }
  return out;
}

}  // namespace detail

inline RunReport cmd_simulate(const Options& o) {
  detail::require_model(o);
  if (o.policy.empty() == o.method.empty()) throw Error(ErrorCode::InvalidArgument, "give exactly one of --policy or --method");
  const json doc = io::load_json_file(o.model);
  SimConfig cfg;
  cfg.n_paths = o.paths;
  cfg.seed = o.seed;
  cfg.antithetic = o.antithetic;
  cfg.threads = o.threads;

  RunReport r;
  r.command = "simulate";
  r.inputs = {{"model", o.model}, {"paths", o.paths}, {"seed", o.seed}, {"antithetic", o.antithetic}};
  if (!o.policy.empty()) r.inputs["policy"] = o.policy;
  if (!o.method.empty()) r.inputs["method"] = o.method;

  Estimate est;
  std::optional<double> closed;
  std::vector<double> terminal;
  std::vector<AffineRule> rules;

  if (io::is_lq_document(doc)) {
    LQModel m = io::lq_from_json(doc);
    if (o.x0 || !o.mu0.empty()) m = make_lq_model(m.b, m.d, m.sigma, m.horizon, m.noise, detail::initial_law(o));
    r.inputs["lq"] = io::lq_to_json(m);
    if (!o.policy.empty()) {
      rules = io::rules_from_json(io::load_json_file(o.policy));
    } else if (o.method == "population" || o.method == "optimal") {
      const auto sol = lq_solve(m);
      rules = sol.forward.rules;
      closed = sol.forward.value;
    } else if (o.method == "equilibrium") {
      const auto back = lq_backward(m);
      const auto eq = lq_equilibrium(m, back);
      rules = eq.rules;
      closed = eq.value;
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown LQ method \"" + o.method + "\" (population, equilibrium)");
    }
    const auto spec = make_lq_spec(m);
    const auto samples = simulate_paths(spec, std::span<const AffineRule>(rules), m.mu0, cfg, false);
    est = estimate_general(spec, samples, cfg.antithetic);
    terminal = samples.states.front();
  } else {
    const auto model = io::market_from_json(doc);
    auto p = make_mv_problem(model, o.lambda, detail::initial_law(o));
    r.inputs["market"] = io::market_to_json(model);
    r.inputs["lambda"] = o.lambda;
    r.inputs.update(detail::initial_law_json(p.mu0));
    if (!o.policy.empty()) {
      rules = io::rules_from_json(io::load_json_file(o.policy));
    } else {
      const auto kind = detail::parse_method(o.method);
      const auto sol = detail::solve_mv(p, kind);
      rules = sol.rules;
      // The realised population rules attain J_0(mu_0) on the original problem.
      closed = kind == SolutionKind::Population ? population_value(p) : sol.value;
    }
    terminal = simulate_mv(model, rules, p.mu0, cfg);
    est = estimate_mv_objective(terminal, o.lambda, cfg.antithetic ? 2 : 1);
  }

  r.outputs = {{"estimate", detail::estimate_json(est)}, {"rules", io::rules_to_json(rules)}};
  r.outputs["closed_form"] = closed ? json(*closed) : json(nullptr);
  r.text = detail::kv("command", "simulate") + detail::estimate_text(est, closed);
  r.csv = samples_to_csv(terminal, 12);
  return r;
}

inline RunReport cmd_engine(const Options& o) {
  detail::require_model(o);
  const json doc = io::load_json_file(o.model);
  EngineOptions eo;
  eo.threads = o.threads;

  RunReport r;
  r.command = "engine";
  r.inputs = {{"model", o.model}, {"family_size", o.family_size}, {"spread", o.spread}};
  if (o.family_size < 1) throw Error(ErrorCode::InvalidArgument, "--family-size must be at least 1");

  std::vector<std::size_t> choices;
  std::vector<AffineRule> rules;
  std::vector<double> cost_to_go;
  double value = 0.0;
  double closed = 0.0;
  std::size_t sequences = 0;
  std::string caveat;

  const auto collect = [&](const auto& result) {
    choices = result.choices;
    rules = result.path.rules;
    cost_to_go = result.path.cost_to_go;
    value = result.value;
    sequences = result.sequences_evaluated;
    caveat = result.caveat;
  };

  if (io::is_lq_document(doc)) {
    LQModel m = io::lq_from_json(doc);
    if (o.x0 || !o.mu0.empty()) m = make_lq_model(m.b, m.d, m.sigma, m.horizon, m.noise, detail::initial_law(o));
    r.inputs["lq"] = io::lq_to_json(m);
    collect(engine_backward(make_lq_spec(m), lq_family(m, o.family_size, o.spread), m.mu0, eo));
    closed = lq_solve(m).forward.value;
  } else {
    const auto model = io::market_from_json(doc);
    auto p = make_mv_problem(model, o.lambda, detail::initial_law(o));
    r.inputs["market"] = io::market_to_json(model);
    r.inputs["lambda"] = o.lambda;
    r.inputs.update(detail::initial_law_json(p.mu0));
    collect(engine_backward(make_mean_variance_spec(model, o.lambda), mean_variance_family(p, o.family_size, o.spread), p.mu0, eo));
    closed = population_value(p);
  }

  r.outputs = {{"value", value},          {"closed_form", closed},         {"choices", choices},
               {"cost_to_go", cost_to_go}, {"rules", io::rules_to_json(rules)}, {"sequences_evaluated", sequences},
               {"caveat", caveat}};
  std::string picks;
  for (std::size_t k = 0; k < choices.size(); ++k) picks += (k ? " " : "") + std::to_string(choices[k]);
  r.text = detail::kv("command", "engine") + detail::kv("value", fmt(value)) + detail::kv("closed form", fmt(closed)) +
           detail::kv("choices", picks) + detail::kv("sequences", std::to_string(sequences)) + detail::kv("note", caveat) +
           "\nrules\n" + detail::rules_text(rules);
  r.csv = detail::rules_csv(rules);
  return r;
}

struct CommandResult {
  int exit_code = kExitOk;
  std::string stdout_text;
  std::string stderr_text;
};

/// Runs one subcommand, renders it, writes --out if given, and maps errors to exit codes.
inline CommandResult run_command(const std::string& name, const Options& o) {
  CommandResult res;
  try {
    const auto start = std::chrono::steady_clock::now();
    RunReport report;
    if (name == "solve-mv") report = cmd_solve_mv(o);
    else if (name == "solve-lq") report = cmd_solve_lq(o);
    else if (name == "figure1") report = cmd_figure1(o);
    else if (name == "simulate") report = cmd_simulate(o);
    else if (name == "engine") report = cmd_engine(o);
    else throw Error(ErrorCode::InvalidArgument, "unknown command \"" + name + "\"");
    if (o.timings) report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::string body;
    if (o.json) body = report.to_json().dump(2) + "\n";
    else if (o.csv) body = report.csv;
    else body = report.text;

    if (o.out.empty()) {
      res.stdout_text = body;
    } else {
      std::ofstream f(o.out, std::ios::binary);
      if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + o.out);
      f << body;
    }
  } catch (const Error& e) {
    res.exit_code = exit_code_for(e.category());
    res.stderr_text = std::string("error: ") + e.what() + "\n";
  } catch (const std::exception& e) {
    res.exit_code = kExitNumeric;
    res.stderr_text = std::string("error: ") + e.what() + "\n";
  }
  return res;
}

}  // namespace popmdp::cli
