#pragma once

// Scalar LQ problem
//     E[ sum_k A_k^2 ] + (E X_N)^2 -> inf,   X_{n+1} = b X_n + d A_n + sigma R_{n+1},
// with i.i.d. zero-mean noise. The lifted solution acts through the mean of the
// current state law only; the equilibrium strategy is the state-feedback rule
// with the same gain.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "popmdp/errors.hpp"
#include "popmdp/measures.hpp"

namespace popmdp {

struct LQModel {
  double b = 1.0;
  double d = 1.0;
  double sigma = 1.0;
  int horizon = 1;
  DiscreteMeasure noise;  ///< law of R_n, zero mean
  DiscreteMeasure mu0;    ///< law of X_0
};

inline LQModel make_lq_model(double b, double d, double sigma, int horizon, DiscreteMeasure noise, DiscreteMeasure mu0) {
  if (!std::isfinite(b) || !std::isfinite(d)) throw Error(ErrorCode::InvalidArgument, "b and d must be finite");
  if (!std::isfinite(sigma) || sigma <= 0.0) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
  if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
  if (std::abs(mean(noise)) > 1e-12) throw Error(ErrorCode::InvalidArgument, "noise must have zero mean");
  return LQModel{b, d, sigma, horizon, std::move(noise), std::move(mu0)};
}

/// Realised rule of the lifted solution: nu -> constant action coefficient * E nu.
struct LqRuleGenerator {
  int epoch = 0;
  double coefficient = 0.0;  ///< -b d beta_{n+1} / (1 + d^2 beta_{n+1})

  AffineRule operator()(const DiscreteMeasure& nu) const { return AffineRule::linear(0.0, coefficient * mean(nu)); }
};

struct LQBackward {
  std::vector<double> beta;                  ///< beta_0..beta_N
  std::vector<LqRuleGenerator> generators;   ///< epoch 0..N-1
};

inline LQBackward lq_backward(const LQModel& m) {
  const int N = m.horizon;
  LQBackward out;
  out.beta.assign(static_cast<std::size_t>(N) + 1, 1.0);
  // Propagated as 1/beta_n = (1/beta_{n+1} + d^2) / b^2; for b = d = 1 this is integer arithmetic.
  double inverse = 1.0;
  for (int n = N - 1; n >= 0; --n) {
    if (m.b == 0.0) {
      out.beta[static_cast<std::size_t>(n)] = 0.0;
      continue;
    }
    inverse = (inverse + m.d * m.d) / (m.b * m.b);
    out.beta[static_cast<std::size_t>(n)] = 1.0 / inverse;
  }
  for (int n = 0; n < N; ++n) {
    const double next = out.beta[static_cast<std::size_t>(n) + 1];
    out.generators.push_back({n, -m.b * m.d * next / (1.0 + m.d * m.d * next)});
  }
  return out;
}

struct LQForward {
  std::vector<double> means;       ///< E X_0..E X_N
  std::vector<AffineRule> rules;   ///< constant actions phi*_n
  std::vector<double> values;      ///< J_n(mu_n) = beta_n (E X_n)^2
  double value = 0.0;              ///< J_0
};

/// The realised policy ignores the current state but depends on the initial law (semi-Markov).
inline LQForward lq_forward(const LQModel& m, const LQBackward& back) {
  const int N = m.horizon;
  LQForward out;
  double current = mean(m.mu0);
  out.means.push_back(current);
  for (int n = 0; n < N; ++n) {
    const double next_beta = back.beta[static_cast<std::size_t>(n) + 1];
    out.rules.push_back(AffineRule::linear(0.0, back.generators[static_cast<std::size_t>(n)].coefficient * current));
    current *= m.b / (1.0 + m.d * m.d * next_beta);
    out.means.push_back(current);
  }
  for (int n = 0; n <= N; ++n) {
    const double e = out.means[static_cast<std::size_t>(n)];
    out.values.push_back(back.beta[static_cast<std::size_t>(n)] * e * e);
  }
  out.value = out.values.front();
  return out;
}

/// Product form E X_n = E X_0 b^n / prod_{k=1}^n (1 + d^2 beta_k).
inline double lq_mean_closed_form(const LQModel& m, const LQBackward& back, int n) {
  double denom = 1.0;
  for (int k = 1; k <= n; ++k) denom *= 1.0 + m.d * m.d * back.beta[static_cast<std::size_t>(k)];
  return mean(m.mu0) * std::pow(m.b, n) / denom;
}

struct LQEquilibrium {
  std::vector<double> alpha;      ///< alpha_0..alpha_N
  std::vector<double> gamma;      ///< gamma_0..gamma_N
  std::vector<AffineRule> rules;  ///< state feedback x -> gain_n x
  double value = 0.0;             ///< V^e_0(x0) = beta_0 x0^2 + gamma_0
};

/// Requires unit noise variance; evaluated at the point x0 of a Dirac initial law.
inline LQEquilibrium lq_equilibrium(const LQModel& m, const LQBackward& back) {
  if (std::abs(variance(m.noise) - 1.0) > 1e-9) throw Error(ErrorCode::NonUnitVariance, "noise variance must equal 1");
  if (!is_dirac(m.mu0)) throw Error(ErrorCode::NotDirac, "equilibrium value needs a point-mass initial law");
  const int N = m.horizon;
  LQEquilibrium out;
  out.alpha.assign(static_cast<std::size_t>(N) + 1, 1.0);
  out.gamma.assign(static_cast<std::size_t>(N) + 1, 0.0);
  for (int n = N - 1; n >= 0; --n) {
    const auto i = static_cast<std::size_t>(n);
    const double next_beta = back.beta[i + 1];
    out.alpha[i] = out.alpha[i + 1] * m.b / (1.0 + m.d * m.d * next_beta);
    out.gamma[i] = out.gamma[i + 1] + m.sigma * m.sigma * (next_beta - out.alpha[i + 1] * out.alpha[i + 1]);
  }
  for (int n = 0; n < N; ++n) out.rules.push_back(AffineRule::linear(back.generators[static_cast<std::size_t>(n)].coefficient, 0.0));
  const double x0 = m.mu0.point(0);
  out.value = back.beta.front() * x0 * x0 + out.gamma.front();
  return out;
}

struct LQSolution {
  LQBackward backward;
  LQForward forward;
  LQEquilibrium equilibrium;
  bool has_equilibrium = false;
};

/// Optimal solution always; equilibrium comparison when its preconditions hold.
inline LQSolution lq_solve(const LQModel& m) {
  LQSolution out;
  out.backward = lq_backward(m);
  out.forward = lq_forward(m, out.backward);
  if (std::abs(variance(m.noise) - 1.0) <= 1e-9 && is_dirac(m.mu0)) {
    out.equilibrium = lq_equilibrium(m, out.backward);
    out.has_equilibrium = true;
  }
  return out;
}

struct LqOneStep {
  double action = 0.0;
  double value_coefficient = 0.0;  ///< J(nu) = value_coefficient * (E nu)^2
};

/// Minimises E[phi(X)^2] + beta (b E X + d E phi(X))^2 over rules; the optimum is constant.
inline LqOneStep lq_one_step(double nu_mean, double b, double d, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorCode::InvalidArgument, "beta must be positive");
  return {-b * d * beta / (1.0 + d * d * beta) * nu_mean, beta * b * b / (1.0 + d * d * beta)};
}

struct GaussianState {
  double mean = 0.0;
  double variance = 0.0;
};

/// One step of a Gaussian state law under x -> m x + t. The noise enters as
/// sigma^2 times its variance.
inline GaussianState gaussian_propagate(GaussianState s, double slope, double intercept, double b, double d,
                                        double sigma, double noise_variance) {
  if (s.variance < 0.0 || noise_variance < 0.0) throw Error(ErrorCode::NegativeVariance, "variances must be nonnegative");
  const double gain = b + d * slope;
  return {gain * s.mean + d * intercept, gain * gain * s.variance + sigma * sigma * noise_variance};
}

}  // namespace popmdp
