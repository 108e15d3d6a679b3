#pragma once

// The two worked problems expressed as general non-additive MDPs.

#include <Eigen/Dense>

#include "popmdp/lq_solver.hpp"
#include "popmdp/market.hpp"
#include "popmdp/measures.hpp"
#include "popmdp/mv_solver.hpp"
#include "popmdp/population_engine.hpp"

namespace popmdp {

using MeanVarianceSpec = GeneralMDP<double, AffineRule, Eigen::VectorXd>;
using LqSpec = GeneralMDP<double, AffineRule, double>;

/// c_n = 0, c_N(x) = x^2 - 2 lambda x, h(x) = x, G(y) = -y^2, so hat c_N = Var - 2 lambda E.
inline MeanVarianceSpec make_mean_variance_spec(const MarketModel& model, double lambda) {
  MeanVarianceSpec spec;
  spec.horizon = model.horizon();
  std::vector<double> growth;
  for (int k = 1; k <= model.horizon(); ++k) {
    spec.noise.push_back(model.relative_risk(k));
    growth.push_back(1.0 + model.rate(k));
  }
  spec.transition = [growth](int n, const double& x, const Eigen::VectorXd& a, const Eigen::VectorXd& r) {
    return growth[static_cast<std::size_t>(n)] * (x + a.dot(r));
  };
  spec.terminal_cost = [lambda](const double& x) { return x * x - 2.0 * lambda * x; };
  spec.statistic = [](const double& x) { return x; };
  spec.nonlinearity = [](double y) { return -y * y; };
  return spec;
}

/// c_n(x, a) = a^2, c_N = 0, h(x) = x, G(y) = y^2.
inline LqSpec make_lq_spec(const LQModel& m) {
  LqSpec spec;
  spec.horizon = m.horizon;
  spec.noise.assign(static_cast<std::size_t>(m.horizon), m.noise);
  spec.transition = [b = m.b, d = m.d, s = m.sigma](int, const double& x, const Eigen::VectorXd& a, const double& r) {
    return b * x + d * a(0) + s * r;
  };
  spec.stage_cost = [](int, const double&, const Eigen::VectorXd& a) { return a.squaredNorm(); };
  spec.statistic = [](const double& x) { return x; };
  spec.nonlinearity = [](double y) { return y * y; };
  return spec;
}

/// Offsets 0, +s, -s, +2s, -2s, ... for a family of the given size.
inline std::vector<double> perturbation_offsets(std::size_t size, double spread) {
  std::vector<double> out;
  for (std::size_t k = 0; k < size; ++k) {
    const auto step = static_cast<double>((k + 1) / 2);
    out.push_back(k == 0 ? 0.0 : (k % 2 == 1 ? step : -step) * spread);
  }
  return out;
}

/// Per epoch: the exact measure-dependent rule followed by size-1 copies with shifted target level.
inline RuleFamily<double, AffineRule> mean_variance_family(const MVProblem& p, std::size_t size, double spread) {
  RuleFamily<double, AffineRule> family;
  const auto offsets = perturbation_offsets(size, spread);
  for (const auto& gen : population_backward(p)) {
    std::vector<MeasureRule<double, AffineRule>> stage;
    for (double shift : offsets)
      stage.push_back([gen, shift](const DiscreteMeasure& nu) { return AffineRule::target(gen.kappa(nu) + shift, gen.direction); });
    family.push_back(std::move(stage));
  }
  return family;
}

/// Per epoch: the exact mean-feedback rule followed by size-1 copies with shifted coefficient.
inline RuleFamily<double, AffineRule> lq_family(const LQModel& m, std::size_t size, double spread) {
  RuleFamily<double, AffineRule> family;
  const auto offsets = perturbation_offsets(size, spread);
  for (const auto& gen : lq_backward(m).generators) {
    std::vector<MeasureRule<double, AffineRule>> stage;
    for (double shift : offsets) stage.push_back(LqRuleGenerator{gen.epoch, gen.coefficient + shift});
    family.push_back(std::move(stage));
  }
  return family;
}

}  // namespace popmdp
