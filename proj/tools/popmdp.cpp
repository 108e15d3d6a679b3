#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "popmdp/cli.hpp"

namespace {

void add_output_flags(CLI::App* cmd, popmdp::cli::Options& o) {
  cmd->add_flag("--json", o.json, "Print the JSON report");
  cmd->add_flag("--csv", o.csv, "Print CSV");
  cmd->add_option("--out", o.out, "Write the output to a file instead of stdout");
  cmd->add_flag("--timings", o.timings, "Include wall time in the JSON report");
}

void add_start_flags(CLI::App* cmd, popmdp::cli::Options& o) {
  cmd->add_option("--x0", o.x0, "Initial wealth (point mass)");
  cmd->add_option("--mu0", o.mu0, "Initial law JSON file {points, weights}");
}

}  // namespace

int main(int argc, char** argv) {
  popmdp::cli::Options o;
  CLI::App app{"Population-version solvers for time-inconsistent MDPs"};
  app.set_version_flag("--version", std::string("popmdp ") + std::string(popmdp::kVersion));
  app.require_subcommand(1);

  auto* solve_mv = app.add_subcommand("solve-mv", "Solve the mean-variance portfolio problem");
  solve_mv->add_option("--model", o.model, "Market JSON file")->required();
  solve_mv->add_option("--lambda", o.lambda, "Risk trade-off lambda");
  solve_mv->add_option("--method", o.method, "precommit | equilibrium | population")->default_str("population");
  solve_mv->add_flag("--snapshots", o.snapshots, "Include full measures mu_0..mu_N in JSON");
  add_start_flags(solve_mv, o);
  add_output_flags(solve_mv, o);

  auto* solve_lq = app.add_subcommand("solve-lq", "Solve the LQ problem with mean terminal cost");
  solve_lq->add_option("--model", o.model, "LQ JSON file")->required();
  add_start_flags(solve_lq, o);
  add_output_flags(solve_lq, o);

  auto* figure1 = app.add_subcommand("figure1", "Value gap V^e - V^o over horizons 1..Nmax");
  figure1->add_option("--ell", o.ell, "Per-period ell, decimal or p/q")->default_str("1/26");
  figure1->add_option("--lambda", o.lambda, "Risk trade-off lambda");
  figure1->add_option("--Nmax", o.n_max, "Largest horizon")->default_str("50");
  add_output_flags(figure1, o);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of a policy's objective");
  simulate->add_option("--model", o.model, "Market or LQ JSON file")->required();
  simulate->add_option("--policy", o.policy, "Rules JSON file");
  simulate->add_option("--method", o.method, "Use the rules of a solver instead of --policy");
  simulate->add_option("--lambda", o.lambda, "Risk trade-off lambda");
  simulate->add_option("--paths", o.paths, "Number of paths")->default_str("100000");
  simulate->add_option("--seed", o.seed, "Generator seed")->default_str("0");
  simulate->add_flag("--antithetic", o.antithetic, "Antithetic pairs (symmetric two-point noise)");
  simulate->add_option("--threads", o.threads, "Worker threads")->default_str("1");
  add_start_flags(simulate, o);
  add_output_flags(simulate, o);

  auto* engine = app.add_subcommand("engine", "Exhaustive search over finite rule families");
  engine->add_option("--model", o.model, "Market or LQ JSON file")->required();
  engine->add_option("--lambda", o.lambda, "Risk trade-off lambda");
  engine->add_option("--family-size", o.family_size, "Rules per stage")->default_str("5");
  engine->add_option("--spread", o.spread, "Perturbation step")->default_str("0.1");
  engine->add_option("--threads", o.threads, "Worker threads")->default_str("1");
  add_start_flags(engine, o);
  add_output_flags(engine, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : popmdp::cli::kExitInput;
  }

  const auto* chosen = app.get_subcommands().front();
  const auto res = popmdp::cli::run_command(chosen->get_name(), o);
  std::cout << res.stdout_text;
  std::cerr << res.stderr_text;
  return res.exit_code;
}
