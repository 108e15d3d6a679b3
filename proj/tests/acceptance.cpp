// Acceptance gate: runs the nine criteria at their pinned tolerances and prints
// one PASS/FAIL line per criterion. Exit status is nonzero if any criterion fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "popmdp/builtin_specs.hpp"
#include "popmdp/lq_solver.hpp"
#include "popmdp/market.hpp"
#include "popmdp/montecarlo.hpp"
#include "popmdp/mv_solver.hpp"
#include "popmdp/population_engine.hpp"
#include "test_support.hpp"

using namespace popmdp;
using testing_support::two_point_model;

namespace {

const std::string kCli = POPMDP_CLI_PATH;
const std::string kData = POPMDP_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string num(double x, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

/// Runs the executable and captures stdout; status receives the exit code.
std::string capture(const std::string& args, int& status) {
  const std::string cmd = "\"" + kCli + "\" " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    status = -1;
    return {};
  }
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int raw = pclose(pipe);
  status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return out;
}

std::vector<testing_support::RandomInstance> random_instances() {
  std::mt19937_64 rng(20'240'611);
  std::vector<testing_support::RandomInstance> out;
  for (int k = 0; k < 200; ++k) out.push_back(testing_support::random_instance(rng, 1 + k % 3, 1 + (k / 3) % 6));
  return out;
}

Outcome value_gap_table() {
  Outcome o;
  const auto start = Clock::now();
  int status = 0;
  const std::string csv = capture("figure1 --ell 1/26 --lambda 1 --Nmax 50", status);
  const double elapsed = seconds_since(start);
  if (status != 0) return {false, "exit status " + std::to_string(status)};
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<double> gaps;
  while (std::getline(in, line)) gaps.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  const auto rows = figure1_rows(1.0 / 26.0, 1.0, 50);
  bool monotone = true;
  for (std::size_t k = 1; k < gaps.size(); ++k) monotone = monotone && gaps[k] > gaps[k - 1] && rows[k].gap > rows[k - 1].gap;
  const bool sizes = gaps.size() == 50;
  const bool g1 = sizes && gaps[0] == 0.0 && rows[0].gap == 0.0;
  const bool g2 = sizes && std::abs(gaps[1] - 0.0016) <= 1e-12 && std::abs(rows[1].gap - 0.0016) <= 1e-12;
  o.pass = sizes && g1 && g2 && monotone && elapsed < 0.1;
  o.detail = "rows=" + std::to_string(gaps.size()) + " gap(1)=" + (sizes ? num(gaps[0]) : "?") + " gap(2)=" +
             (sizes ? num(rows[1].gap, 17) : "?") + " increasing=" + (monotone ? "yes" : "no") + " time=" + num(elapsed, 3) + "s";
  return o;
}

Outcome point_mass_equivalence(const std::vector<testing_support::RandomInstance>& instances) {
  const auto start = Clock::now();
  double worst_value = 0.0, worst_rule = 0.0;
  for (const auto& inst : instances) {
    const auto p = make_mv_problem(inst.model, inst.lambda, DiscreteMeasure::dirac(inst.x0));
    const auto pre = precommit_policy(p);
    const auto pop = population_solve(p);
    worst_value = std::max({worst_value, std::abs(population_value(p) - pre.value), std::abs(pop.value - pre.value)});
    for (std::size_t n = 0; n < pre.rules.size(); ++n) {
      worst_rule = std::max(worst_rule, std::abs(pop.rules[n].kappa() - pre.rules[n].kappa()));
      worst_rule = std::max(worst_rule, std::abs(pop.rules[n].slope() - pre.rules[n].slope()));
      worst_rule = std::max(worst_rule, (pop.rules[n].direction() - pre.rules[n].direction()).cwiseAbs().maxCoeff());
    }
  }
  const double elapsed = seconds_since(start);
  return {worst_value <= 1e-9 && worst_rule <= 1e-9 && elapsed < 10.0,
          "max|J0-Vo|=" + num(worst_value, 3) + " max rule diff=" + num(worst_rule, 3) + " time=" + num(elapsed, 3) + "s"};
}

Outcome dominance(const std::vector<testing_support::RandomInstance>& instances) {
  double min_gap = INFINITY, min_strict = INFINITY;
  bool ok = true;
  for (const auto& inst : instances) {
    const auto p = make_mv_problem(inst.model, inst.lambda, DiscreteMeasure::dirac(inst.x0));
    const double gap = equilibrium_policy(p).value - precommit_policy(p).value;
    min_gap = std::min(min_gap, gap);
    ok = ok && gap >= -1e-12;
    if (inst.horizon >= 2) {
      const double scaled = gap / (inst.lambda * inst.lambda);
      min_strict = std::min(min_strict, scaled);
      ok = ok && gap > 1e-12 * inst.lambda * inst.lambda;
    }
  }
  return {ok, "min(Ve-Vo)=" + num(min_gap, 3) + " min over N>=2 of (Ve-Vo)/lambda^2=" + num(min_strict, 3)};
}

Outcome identities(const std::vector<testing_support::RandomInstance>& instances) {
  double worst_sm = 0.0, worst_tele_d = 0.0, worst_tele_inv = 0.0;
  bool ranges = true;
  for (const auto& inst : instances) {
    const auto m = compute_moments(inst.model);
    double td = 0.0, ti = 0.0;
    for (int k = 1; k <= m.horizon(); ++k) {
      const double ell = m.ell(k);
      const double target = ell / (1.0 - ell);
      worst_sm = std::max(worst_sm, std::abs(sigma_quadratic(m, k) - target) / target);
      td += ell * m.d(k);
      ti += ell / m.d(k - 1);
      ranges = ranges && ell > 0.0 && ell < 1.0;
    }
    for (int n = 0; n < m.horizon(); ++n) ranges = ranges && m.d(n) > 0.0 && m.d(n) < 1.0;
    ranges = ranges && m.d(m.horizon()) == 1.0;
    worst_tele_d = std::max(worst_tele_d, std::abs(td - (1.0 - m.d(0))));
    worst_tele_inv = std::max(worst_tele_inv, std::abs(ti - (1.0 / m.d(0) - 1.0)));
  }
  return {worst_sm <= 1e-9 && worst_tele_d <= 1e-12 && worst_tele_inv <= 1e-12 && ranges,
          "Sherman-Morrison rel=" + num(worst_sm, 3) + " telescoping=" + num(worst_tele_d, 3) + "," + num(worst_tele_inv, 3) +
              " ranges=" + (ranges ? "ok" : "violated")};
}

/// Coarse grid (step 1e-3) over a box doubled until its argmin is interior, then two refinements
/// by a factor of 100 within 10 coarse steps of the incumbent.
std::pair<double, double> interior_argmin_2d(const std::function<double(double, double)>& f, double half) {
  for (;;) {
    const auto [x, y] = testing_support::grid_argmin_2d(f, -half, half, -half, half, 1e-3, 0);
    if (std::abs(x) < half - 0.01 && std::abs(y) < half - 0.01)
      return testing_support::grid_argmin_2d(f, x - 1e-2, x + 1e-2, y - 1e-2, y + 1e-2, 1e-5, 1, 10, 100.0);
    half *= 2.0;
  }
}

double interior_argmin_1d(const std::function<double(double)>& f, double half) {
  for (;;) {
    const double x = testing_support::grid_argmin_1d(f, -half, half, 1e-3, 0);
    if (std::abs(x) < half - 0.01) return testing_support::grid_argmin_1d(f, x - 1e-2, x + 1e-2, 1e-5, 1, 10, 100.0);
    half *= 2.0;
  }
}

Outcome one_step_oracles() {
  const auto start = Clock::now();
  std::mt19937_64 rng(515);
  std::uniform_real_distribution<double> gross(0.6, 1.7), rate(0.0, 0.1), lam(0.2, 1.0), pos(0.2, 1.0), x(-0.5, 0.5);
  double worst_mv = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double i = rate(rng), lambda = lam(rng), x0 = x(rng);
    std::vector<double> r(3), w(3);
    double total = 0.0;
    for (int j = 0; j < 3; ++j) {
      r[static_cast<std::size_t>(j)] = gross(rng) / (1.0 + i) - 1.0;
      w[static_cast<std::size_t>(j)] = pos(rng);
      total += w[static_cast<std::size_t>(j)];
    }
    double er = 0.0, er2 = 0.0;
    for (int j = 0; j < 3; ++j) {
      w[static_cast<std::size_t>(j)] /= total;
      er += w[static_cast<std::size_t>(j)] * r[static_cast<std::size_t>(j)];
      er2 += w[static_cast<std::size_t>(j)] * r[static_cast<std::size_t>(j)] * r[static_cast<std::size_t>(j)];
    }
    // Same conditioning as the shared instance generator.
    if (er * er / er2 > 0.5) {
      --trial;
      continue;
    }
    // E[(x + y R - b)^2 - 2 lambda/(1+i) (x + y R)] with X = x0.
    const auto f = [&](double y, double b) {
      double acc = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        const double v = x0 + y * r[j];
        acc += w[j] * ((v - b) * (v - b) - 2.0 * lambda / (1.0 + i) * v);
      }
      return acc;
    };
    const auto [y, b] = interior_argmin_2d(f, 2.0);
    const auto s = one_step_mv(x0, lambda, i, Eigen::MatrixXd::Constant(1, 1, er2), Eigen::VectorXd::Constant(1, er));
    const double y_closed = (s.kappa - x0) * s.direction(0);
    worst_mv = std::max({worst_mv, std::abs(y - y_closed), std::abs(b - s.b), std::abs(f(y, b) - f(y_closed, s.b))});
  }

  double worst_lq = 0.0;
  std::uniform_real_distribution<double> coef(-2.0, 2.0), beta(0.1, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double bb = coef(rng), dd = coef(rng), bt = beta(rng), m = coef(rng);
    // E[phi^2] + beta (b m + d E phi)^2 over constant rules phi = a.
    const auto g = [&](double a) { return a * a + bt * (bb * m + dd * a) * (bb * m + dd * a); };
    const double a = interior_argmin_1d(g, 2.0);
    const auto s = lq_one_step(m, bb, dd, bt);
    worst_lq = std::max({worst_lq, std::abs(a - s.action), std::abs(g(a) - s.value_coefficient * m * m)});
  }
  const double elapsed = seconds_since(start);
  return {worst_mv <= 1e-5 && worst_lq <= 1e-5 && elapsed < 30.0,
          "mean-variance max dev=" + num(worst_mv, 3) + " LQ max dev=" + num(worst_lq, 3) + " time=" + num(elapsed, 3) + "s"};
}

Outcome lq_suite() {
  const auto coin = make_measure({-1.0, 1.0}, {0.5, 0.5});
  bool exact = true;
  const auto back = lq_backward(make_lq_model(1.0, 1.0, 1.0, 50, coin, DiscreteMeasure::dirac(0.0)));
  for (int k = 0; k <= 50; ++k) exact = exact && back.beta[static_cast<std::size_t>(50 - k)] == 1.0 / (k + 1);
  const auto m3 = make_lq_model(1.0, 1.0, 1.0, 3, coin, DiscreteMeasure::dirac(0.0));
  const double gamma0 = lq_equilibrium(m3, lq_backward(m3)).gamma.front();
  bool gap = true;
  int tested = 0;
  for (double b : {1.0, -0.7, 1.4})
    for (double d : {1.0, 0.5, -1.2})
      for (double sigma : {1.0, 0.4})
        for (int N = 2; N <= 8; ++N) {
          const auto sol = lq_solve(make_lq_model(b, d, sigma, N, coin, DiscreteMeasure::dirac(0.0)));
          gap = gap && sol.forward.value == 0.0 && sol.forward.value < sol.equilibrium.gamma.front();
          ++tested;
        }
  return {exact && std::abs(gamma0 - 17.0 / 36.0) <= 1e-12 && gap,
          std::string("beta exact for k<=50: ") + (exact ? "yes" : "no") + " gamma0=" + num(gamma0, 15) + " J0=0<gamma0 on " +
              std::to_string(tested) + " instances: " + (gap ? "yes" : "no")};
}

Outcome monte_carlo() {
  std::string detail;
  bool ok = true;
  for (int N : {1, 2, 5}) {
    const auto start = Clock::now();
    const auto p = make_mv_problem(two_point_model(N), 1.0, DiscreteMeasure::dirac(0.0));
    SimConfig cfg;
    cfg.n_paths = 1'000'000;
    cfg.seed = 1000 + static_cast<std::uint64_t>(N);
    cfg.threads = 4;
    const auto pop = population_solve(p);
    const auto opt = estimate_mv_objective(simulate_mv(p.model, pop.rules, p.mu0, cfg), 1.0);
    const double closed = population_value(p);
    const auto eq = equilibrium_policy(p);
    cfg.seed += 100;
    const auto est_eq = estimate_mv_objective(simulate_mv(p.model, eq.rules, p.mu0, cfg), 1.0);
    const double z_opt = (opt.value - closed) / opt.std_error;
    const double z_eq = (est_eq.value - eq.value) / est_eq.std_error;
    const double elapsed = seconds_since(start);
    ok = ok && std::abs(z_opt) <= 4.0 && std::abs(z_eq) <= 4.0 && elapsed < 60.0;
    detail += "N=" + std::to_string(N) + " z_opt=" + num(z_opt, 3) + " z_eq=" + num(z_eq, 3) + " (" + num(elapsed, 3) + "s) ";
  }
  return {ok, detail};
}

Outcome engine_cross_check() {
  double worst = 0.0;
  bool exact_choices = true;
  const auto coin = make_measure({-1.0, 1.0}, {0.5, 0.5});

  std::mt19937_64 rng(88);
  std::vector<MVProblem> mv;
  for (int N = 1; N <= 3; ++N) mv.push_back(make_mv_problem(two_point_model(N), 1.0, DiscreteMeasure::dirac(0.0)));
  mv.push_back(make_mv_problem(two_point_model(3), 0.6, make_measure({0.0, 1.0}, {0.5, 0.5})));
  for (int k = 0; k < 3; ++k) {
    const auto inst = testing_support::random_instance(rng, 1 + k, 3);
    mv.push_back(make_mv_problem(inst.model, inst.lambda, DiscreteMeasure::dirac(inst.x0)));
  }
  for (const auto& p : mv) {
    const auto spec = make_mean_variance_spec(p.model, p.lambda);
    const auto single = engine_backward(spec, mean_variance_family(p, 1, 0.0), p.mu0);
    worst = std::max(worst, std::abs(single.value - population_value(p)));
    if (p.moments.horizon() == 3) {
      const auto wide = engine_backward(spec, mean_variance_family(p, 5, 0.1), p.mu0);
      exact_choices = exact_choices && wide.choices == std::vector<std::size_t>{0, 0, 0};
    }
  }

  std::vector<LQModel> lq{make_lq_model(1.0, 1.0, 1.0, 3, coin, DiscreteMeasure::dirac(2.0)),
                          make_lq_model(1.3, -0.6, 0.8, 3, coin, DiscreteMeasure::dirac(-1.5)),
                          make_lq_model(0.9, 1.1, 1.0, 3, make_measure({-1.0, 0.5}, {1.0 / 3.0, 2.0 / 3.0}),
                                        make_measure({0.0, 3.0}, {0.25, 0.75}))};
  for (const auto& m : lq) {
    const auto spec = make_lq_spec(m);
    const auto single = engine_backward(spec, lq_family(m, 1, 0.0), m.mu0);
    worst = std::max(worst, std::abs(single.value - lq_solve(m).forward.value));
    const auto wide = engine_backward(spec, lq_family(m, 5, 0.1), m.mu0);
    exact_choices = exact_choices && wide.choices == std::vector<std::size_t>{0, 0, 0};
  }
  return {worst <= 1e-9 && exact_choices,
          "max|engine-closed|=" + num(worst, 3) + " exact rule selected at every stage: " + (exact_choices ? "yes" : "no")};
}

Outcome determinism() {
  const std::string mv = "\"" + kData + "/two_point_n5.json\"";
  const std::string lq = "\"" + kData + "/lq_n3.json\"";
  const std::vector<std::string> commands{
      "simulate --model " + mv + " --method population --paths 200000 --seed 42 --json",
      "simulate --model " + mv + " --method equilibrium --paths 200000 --seed 42 --antithetic --json",
      "simulate --model " + lq + " --method equilibrium --paths 200000 --seed 7 --json",
      "engine --model " + mv + " --json",
      "solve-mv --model " + mv + " --mu0 \"" + kData + "/mu0_two_point.json\" --method population --json",
  };
  bool ok = true;
  int compared = 0;
  for (const auto& c : commands) {
    int s1 = 0, s2 = 0, s3 = 0;
    const auto a = capture(c, s1);
    const auto b = capture(c, s2);
    const bool threaded = c.rfind("simulate", 0) == 0 || c.rfind("engine", 0) == 0;
    const auto t = threaded ? capture(c + " --threads 4", s3) : a;
    ok = ok && s1 == 0 && s2 == 0 && s3 == 0 && !a.empty() && a == b && a == t;
    compared += threaded ? 3 : 2;
  }
  return {ok, std::to_string(compared) + " reports compared byte for byte, threads 1 vs 4 included"};
}

}  // namespace

int main() {
  const auto instances = random_instances();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Value-gap table", value_gap_table},
      {"Point-mass equivalence", [&] { return point_mass_equivalence(instances); }},
      {"Dominance", [&] { return dominance(instances); }},
      {"Identity suite", [&] { return identities(instances); }},
      {"One-step oracles", one_step_oracles},
      {"LQ suite", lq_suite},
      {"Monte Carlo validation", monte_carlo},
      {"Engine cross-check", engine_cross_check},
      {"Determinism", determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << "criterion " << (k + 1) << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[k].first << ": " << o.detail
              << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
