// Scalar LQ problem with J = E sum a_n^2 + (E X_N)^2: the population optimum
// against the subgame-perfect policy as the horizon grows.

#include <cstdio>

#include "popmdp/lq_solver.hpp"

using namespace popmdp;

int main() {
  const auto coin = make_measure({-1.0, 1.0}, {0.5, 0.5});
  std::printf("%3s %12s %12s %12s\n", "N", "J0", "Ve0", "gamma0");
  for (int N = 1; N <= 8; ++N) {
    const auto sol = lq_solve(make_lq_model(1.0, 1.0, 1.0, N, coin, DiscreteMeasure::dirac(2.0)));
    std::printf("%3d %12.8f %12.8f %12.8f\n", N, sol.forward.value, sol.equilibrium.value, sol.equilibrium.gamma.front());
  }
  const auto sol = lq_solve(make_lq_model(1.0, 1.0, 1.0, 3, coin, DiscreteMeasure::dirac(2.0)));
  std::printf("\nN = 3, x0 = 2: actions");
  for (const auto& r : sol.forward.rules) std::printf(" %.8f", r.scalar(0.0));
  std::printf("\n");
  return 0;
}
