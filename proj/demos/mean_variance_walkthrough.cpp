// Two-point market (rate 0.5, gross returns 3 or 0.5): pre-commitment,
// equilibrium and population-optimal policies side by side.

#include <cstdio>

#include "popmdp/mv_solver.hpp"

using namespace popmdp;

namespace {

MarketModel two_point(int N) {
  std::vector<double> rates(static_cast<std::size_t>(N), 0.5);
  std::vector<ReturnDistribution> returns(static_cast<std::size_t>(N));
  for (auto& r : returns) {
    r.points = {Eigen::VectorXd::Constant(1, 3.0), Eigen::VectorXd::Constant(1, 0.5)};
    r.probs = {0.5, 0.5};
  }
  return build_market(rates, returns);
}

}  // namespace

int main() {
  std::printf("%3s %14s %14s %14s\n", "N", "precommit", "equilibrium", "gap");
  for (int N = 1; N <= 6; ++N) {
    const auto p = make_mv_problem(two_point(N), 1.0, DiscreteMeasure::dirac(0.0));
    const double vo = precommit_policy(p).value;
    const double ve = equilibrium_policy(p).value;
    std::printf("%3d %14.10f %14.10f %14.10f\n", N, vo, ve, ve - vo);
  }

  // Random start: the population rule targets a level that depends on the whole law.
  const auto p = make_mv_problem(two_point(3), 1.0, make_measure({0.0, 1.0}, {0.5, 0.5}));
  const auto sol = population_solve(p);
  std::printf("\nstart {0, 1} equiprobable, N = 3: value %.10f\n", sol.value);
  for (std::size_t n = 0; n < sol.rules.size(); ++n)
    std::printf("  epoch %zu: target %.10f, mean wealth %.10f\n", n, sol.rules[n].kappa(), mean(sol.measures[n]));
  return 0;
}
