#pragma once

// Closed-form solvers for the mean-variance problem
//     Var[X_N] - 2 lambda E[X_N] -> inf
// with wealth X_{n+1} = (1 + i_{n+1}) (X_n + A_n . R_{n+1}).
//
// Three solutions are provided: the pre-commitment policy, the equilibrium
// (subgame-perfect) strategy and the measure-valued backward-forward solution.
// The latter starts from an arbitrary initial wealth law mu_0 and coincides with
// the pre-commitment policy for mu_0 = delta_{x0}.

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "popmdp/errors.hpp"
#include "popmdp/market.hpp"
#include "popmdp/measures.hpp"

namespace popmdp {

enum class SolutionKind { PreCommitment, Equilibrium, Population };

constexpr std::string_view to_string(SolutionKind kind) noexcept {
  switch (kind) {
    case SolutionKind::PreCommitment: return "precommit";
    case SolutionKind::Equilibrium: return "equilibrium";
    case SolutionKind::Population: return "population";
  }
  return "unknown";
}

struct MVProblem {
  MarketModel model;
  StageMoments moments;
  double lambda = 0.0;
  DiscreteMeasure mu0;
};

/// Computes the moments and validates lambda. lambda = 0 (pure variance) is accepted.
inline MVProblem make_mv_problem(MarketModel model, double lambda, DiscreteMeasure mu0) {
  if (!std::isfinite(lambda) || lambda < 0.0) throw Error(ErrorCode::InvalidArgument, "lambda must be finite and nonnegative");
  StageMoments moments = compute_moments(model);
  return MVProblem{std::move(model), std::move(moments), lambda, std::move(mu0)};
}

struct MVSolution {
  SolutionKind kind = SolutionKind::PreCommitment;
  std::vector<AffineRule> rules;          ///< epoch 0..N-1
  std::vector<DiscreteMeasure> measures;  ///< mu_0..mu_N when a forward pass ran
  double value = 0.0;
};

namespace detail {

inline double dirac_point(const DiscreteMeasure& mu) {
  if (!is_dirac(mu)) throw Error(ErrorCode::NotDirac, "initial law must be a point mass");
  return mu.point(0);
}

}  // namespace detail

/// Elementary-symmetric form of prod(1 + h_k) - 1 - sum h_k: sum over j >= 2 of e_j(h).
/// Every term is nonnegative, so the result is exactly 0 for a single period.
inline double higher_order_product_excess(std::span<const double> h) {
  std::vector<double> e(h.size() + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t k = 0; k < h.size(); ++k)
    for (std::size_t j = k + 1; j >= 1; --j) e[j] += e[j - 1] * h[k];
  double acc = 0.0;
  for (std::size_t j = h.size(); j >= 2; --j) acc += e[j];
  return acc;
}

inline MVSolution precommit_policy(const MVProblem& p) {
  const double x0 = detail::dirac_point(p.mu0);
  const auto& mom = p.moments;
  const int N = mom.horizon();
  const double SN = mom.bond(N);
  const double d0 = mom.d(0);
  MVSolution sol;
  sol.kind = SolutionKind::PreCommitment;
  for (int n = 0; n < N; ++n) {
    const auto& pm = mom.period(n + 1);
    sol.rules.push_back(AffineRule::target((x0 + p.lambda / (SN * d0)) * mom.bond(n), pm.Cinv * pm.mean));
  }
  sol.value = p.lambda * p.lambda * (1.0 - 1.0 / d0) - 2.0 * p.lambda * x0 * SN;
  return sol;
}

struct WealthMoments {
  double mean = 0.0;
  double second_moment = 0.0;
  double variance() const { return second_moment - mean * mean; }
};

/// E X_N and E X_N^2 under the pre-commitment policy, pivot b = S_N x0 + lambda / d_0.
inline WealthMoments precommit_moments(const MVProblem& p) {
  const double x0 = detail::dirac_point(p.mu0);
  const int N = p.moments.horizon();
  const double SN = p.moments.bond(N);
  const double d0 = p.moments.d(0);
  const double b = SN * x0 + p.lambda / d0;
  return {x0 * SN * d0 + b * (1.0 - d0), (x0 * SN) * (x0 * SN) * d0 + b * b * (1.0 - d0)};
}

/// Wealth-independent rules lambda (S_n / S_N) Sigma_{n+1}^{-1} E R_{n+1}.
inline MVSolution equilibrium_policy(const MVProblem& p) {
  const double x0 = detail::dirac_point(p.mu0);
  const auto& mom = p.moments;
  const int N = mom.horizon();
  const double SN = mom.bond(N);
  MVSolution sol;
  sol.kind = SolutionKind::Equilibrium;
  double quad_sum = 0.0;
  for (int n = 0; n < N; ++n) {
    const auto& pm = mom.period(n + 1);
    Eigen::VectorXd dir = pm.Sigma.llt().solve(pm.mean);
    sol.rules.push_back(AffineRule::linear(0.0, p.lambda * mom.bond(n) / SN, std::move(dir)));
    quad_sum += pm.ell / (1.0 - pm.ell);
  }
  sol.value = -2.0 * p.lambda * x0 * SN - p.lambda * p.lambda * quad_sum;
  return sol;
}

/// V^e - V^o = lambda^2 [(1 - d_0) / d_0 - sum h_k] with h_k = ell_k / (1 - ell_k).
inline double value_gap(const MVProblem& p) {
  detail::dirac_point(p.mu0);
  std::vector<double> h;
  for (int k = 1; k <= p.moments.horizon(); ++k) h.push_back(p.moments.ell(k) / (1.0 - p.moments.ell(k)));
  return p.lambda * p.lambda * higher_order_product_excess(h);
}

/// Measure-dependent rule nu -> (lambda * lambda_coefficient + E nu - x) direction, stored as data.
struct MvRuleGenerator {
  int epoch = 0;
  double lambda = 0.0;
  double lambda_coefficient = 0.0;  ///< S_n / (d_n S_N)
  bool uses_mean = true;
  Eigen::VectorXd direction;        ///< C_{n+1}^{-1} E R_{n+1}

  double kappa(const DiscreteMeasure& nu) const {
    return lambda * lambda_coefficient + (uses_mean ? mean(nu) : 0.0);
  }

  AffineRule operator()(const DiscreteMeasure& nu) const { return AffineRule::target(kappa(nu), direction); }
};

inline std::vector<MvRuleGenerator> population_backward(const MVProblem& p) {
  const auto& mom = p.moments;
  const int N = mom.horizon();
  const double SN = mom.bond(N);
  std::vector<MvRuleGenerator> gens;
  gens.reserve(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    const auto& pm = mom.period(n + 1);
    gens.push_back(MvRuleGenerator{n, p.lambda, mom.bond(n) / (mom.d(n) * SN), true, pm.Cinv * pm.mean});
  }
  return gens;
}

/// One step of the wealth dynamics for epoch n (period n+1).
struct WealthTransition {
  double growth = 1.0;  ///< 1 + i_{n+1}
  double operator()(double x, const Eigen::VectorXd& action, const Eigen::VectorXd& risk) const {
    return growth * (x + action.dot(risk));
  }
};

struct ForwardOptions {
  std::size_t support_cap = kDefaultSupportCap;
  bool merge_atoms = false;
  double merge_eps = 1e-12;
};

/// Realises phi_n = generator_n(mu_n) and mu_{n+1} = pushforward(mu_n, phi_n) for n = 0..N-1.
inline MVSolution population_forward(const MVProblem& p, std::span<const MvRuleGenerator> generators,
                                     const ForwardOptions& opts = {}) {
  const int N = p.moments.horizon();
  if (static_cast<int>(generators.size()) != N) throw Error(ErrorCode::LengthMismatch, "one generator per epoch required");
  MVSolution sol;
  sol.kind = SolutionKind::Population;
  sol.measures.push_back(p.mu0);
  for (int n = 0; n < N; ++n) {
    const DiscreteMeasure& current = sol.measures.back();
    AffineRule rule = generators[static_cast<std::size_t>(n)](current);
    const VectorMeasure noise = p.model.relative_risk(n + 1);
    DiscreteMeasure next = pushforward(current, rule, WealthTransition{1.0 + p.model.rate(n + 1)}, noise, opts.support_cap);
    if (opts.merge_atoms) next = merge_atoms(next, opts.merge_eps);
    sol.rules.push_back(std::move(rule));
    sol.measures.push_back(std::move(next));
  }
  sol.value = terminal_mv_cost(sol.measures.back(), p.lambda);
  return sol;
}

inline MVSolution population_solve(const MVProblem& p, const ForwardOptions& opts = {}) {
  const auto gens = population_backward(p);
  return population_forward(p, gens, opts);
}

/// J_0(mu_0) = S_N^2 d_0 Var(mu_0) - 2 lambda S_N E(mu_0) - lambda^2 (1/d_0 - 1).
inline double population_value(const MVProblem& p) {
  const int N = p.moments.horizon();
  const double SN = p.moments.bond(N);
  const double d0 = p.moments.d(0);
  return SN * SN * d0 * variance(p.mu0) - 2.0 * p.lambda * SN * mean(p.mu0) -
         p.lambda * p.lambda * (1.0 / d0 - 1.0);
}

/// Value function J_n of the lifted problem at epoch n (0 <= n <= N):
/// d_n (S_N/S_n)^2 Var(nu) - 2 lambda (S_N/S_n) E(nu) - lambda^2 (1/d_n - 1).
inline double population_stage_value(const MVProblem& p, int n, const DiscreteMeasure& nu) {
  const int N = p.moments.horizon();
  if (n < 0 || n > N) throw Error(ErrorCode::InvalidArgument, "epoch out of range");
  const double growth = p.moments.bond(N) / p.moments.bond(n);
  const double dn = p.moments.d(n);
  return dn * growth * growth * variance(nu) - 2.0 * p.lambda * growth * mean(nu) -
         p.lambda * p.lambda * (1.0 / dn - 1.0);
}

/// Closed-form target level of the realised rule at epoch n: (E mu_0 + lambda / (S_N d_0)) S_n.
inline double population_kappa_closed_form(const MVProblem& p, int n) {
  const int N = p.moments.horizon();
  return (mean(p.mu0) + p.lambda / (p.moments.bond(N) * p.moments.d(0))) * p.moments.bond(n);
}

/// E X_0..E X_N under the realised measure-valued policy.
inline std::vector<double> expected_wealth_forward(const MVProblem& p) {
  const int N = p.moments.horizon();
  const double SN = p.moments.bond(N);
  const double m0 = mean(p.mu0);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(N) + 1);
  double acc = 0.0;
  out.push_back(m0);
  for (int n = 1; n <= N; ++n) {
    acc += p.moments.ell(n) / p.moments.d(n - 1);
    out.push_back(p.moments.bond(n) * (m0 + p.lambda / SN * acc));
  }
  return out;
}

struct OneStepMv {
  double kappa = 0.0;
  double b = 0.0;
  Eigen::VectorXd direction;
};

/// Minimiser of the one-period problem with X ~ nu: the rule (kappa - x) direction
/// and the optimal pivot b of the quadratic embedding.
inline OneStepMv one_step_mv(double nu_mean, double lambda, double rate, const Eigen::MatrixXd& C,
                             const Eigen::VectorXd& meanR) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(C);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularCovariance, "second-moment matrix");
  Eigen::VectorXd dir = ldlt.solve(meanR);
  const double ell = meanR.dot(dir);
  if (!(ell > 0.0 && ell < 1.0)) throw Error(ErrorCode::DegenerateRisk, "ell must lie in (0, 1)");
  const double scaled = lambda / (1.0 + rate);
  OneStepMv out;
  out.b = nu_mean + scaled * ell / (1.0 - ell);
  out.kappa = out.b + scaled;
  out.direction = std::move(dir);
  return out;
}

struct Figure1Row {
  int horizon = 0;
  double precommit = 0.0;    ///< V^o at x0 = 0
  double equilibrium = 0.0;  ///< V^e at x0 = 0
  double gap = 0.0;          ///< V^e - V^o
};

/// Stationary model with per-period ell; the gap does not depend on the rate or x0.
inline std::vector<Figure1Row> figure1_rows(double ell, double lambda, int n_max) {
  if (!(ell > 0.0 && ell < 1.0)) throw Error(ErrorCode::BadEll, "ell must lie in (0, 1)");
  if (n_max < 1) throw Error(ErrorCode::InvalidArgument, "Nmax must be at least 1");
  const double h = ell / (1.0 - ell);
  std::vector<Figure1Row> rows;
  std::vector<double> hs;
  for (int N = 1; N <= n_max; ++N) {
    hs.push_back(h);
    Figure1Row row;
    row.horizon = N;
    row.precommit = -lambda * lambda * (std::pow(1.0 / (1.0 - ell), N) - 1.0);
    row.equilibrium = -lambda * lambda * N * h;
    row.gap = lambda * lambda * higher_order_product_excess(hs);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace popmdp
