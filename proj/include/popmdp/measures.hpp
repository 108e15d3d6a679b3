#pragma once

// Finite (particle) probability measures on the state space and the exact
// pushforward of a measure under a decision rule and a finite noise law.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "popmdp/errors.hpp"
#include "popmdp/numeric.hpp"

namespace popmdp {

namespace detail {

inline bool state_is_finite(double x) { return std::isfinite(x); }

inline bool state_is_finite(const Eigen::VectorXd& x) { return x.allFinite(); }

}  // namespace detail

/// Weighted atoms. Duplicate points are kept as separate atoms.
template <class State>
class BasicMeasure {
 public:
  using state_type = State;

  BasicMeasure() = default;

  /// Validating constructor. Weights off from unit mass by less than 1e-9 are
  /// renormalised, anything worse is rejected.
  BasicMeasure(std::vector<State> points, std::vector<double> weights)
      : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.empty()) throw Error(ErrorCode::EmptySupport, "measure needs at least one atom");
    if (points_.size() != weights_.size())
      throw Error(ErrorCode::BadWeights, "points and weights differ in length");
    double total = 0.0;
    for (double w : weights_) {
      if (!std::isfinite(w) || w < 0.0) throw Error(ErrorCode::BadWeights, "weights must be finite and nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) >= kRenormalizeTolerance) {
      std::ostringstream os;
      os << "weights sum to " << total;
      throw Error(ErrorCode::BadWeights, os.str());
    }
    if (total != 1.0)
      for (double& w : weights_) w /= total;
    for (const auto& p : points_)
      if (!detail::state_is_finite(p)) throw Error(ErrorCode::NonFiniteState, "atom is NaN or infinite");
  }

  /// Skips validation; used for pushforward results whose weights are exact products.
  static BasicMeasure trusted(std::vector<State> points, std::vector<double> weights) {
    BasicMeasure m;
    m.points_ = std::move(points);
    m.weights_ = std::move(weights);
    return m;
  }

  static BasicMeasure dirac(State x) { return BasicMeasure({std::move(x)}, {1.0}); }

  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<State>& points() const noexcept { return points_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const State& point(std::size_t i) const { return points_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  double total_mass() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

  /// Integral of f against the measure, summed in atom order.
  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) acc += weights_[i] * f(points_[i]);
    return acc;
  }

 private:
  std::vector<State> points_;
  std::vector<double> weights_;
};

using DiscreteMeasure = BasicMeasure<double>;
using VectorMeasure = BasicMeasure<Eigen::VectorXd>;

inline DiscreteMeasure make_measure(std::vector<double> points, std::vector<double> weights) {
  return DiscreteMeasure(std::move(points), std::move(weights));
}

inline double mean(const DiscreteMeasure& mu) {
  return mu.integrate([](double x) { return x; });
}

inline double second_moment(const DiscreteMeasure& mu) {
  return mu.integrate([](double x) { return x * x; });
}

/// Central second moment, evaluated in two passes so it cannot go negative.
inline double variance(const DiscreteMeasure& mu) {
  const double m = mean(mu);
  const double v = mu.integrate([m](double x) { return (x - m) * (x - m); });
  return v < 0.0 ? 0.0 : v;
}

inline bool is_dirac(const DiscreteMeasure& mu) {
  return std::all_of(mu.points().begin(), mu.points().end(),
                     [&](double x) { return x == mu.point(0); });
}

/// Var(mu) - 2 lambda E(mu): the lifted terminal cost of the mean-variance problem.
inline double terminal_mv_cost(const DiscreteMeasure& mu, double lambda) {
  return variance(mu) - 2.0 * lambda * mean(mu);
}

/// Sorts the atoms and sums the weights of points within eps of their left neighbour chain.
inline DiscreteMeasure merge_atoms(const DiscreteMeasure& mu, double eps = 1e-12) {
  std::vector<std::size_t> order(mu.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mu.point(a) < mu.point(b); });
  std::vector<double> points;
  std::vector<double> weights;
  for (std::size_t idx : order) {
    if (!points.empty() && std::abs(mu.point(idx) - points.back()) <= eps) {
      weights.back() += mu.weight(idx);
    } else {
      points.push_back(mu.point(idx));
      weights.push_back(mu.weight(idx));
    }
  }
  return DiscreteMeasure::trusted(std::move(points), std::move(weights));
}

/// Exact image of mu under x -> transition(x, rule(x), r) with r drawn from noise.
/// Atoms are laid out i-major (source atom), j-minor (noise atom).
template <class State, class Rule, class Transition, class Noise>
BasicMeasure<State> pushforward(const BasicMeasure<State>& mu, const Rule& rule,
                                const Transition& transition, const BasicMeasure<Noise>& noise,
                                std::size_t support_cap = kDefaultSupportCap) {
  const std::size_t n = mu.size();
  const std::size_t m = noise.size();
  if (m != 0 && n > support_cap / m) {
    std::ostringstream os;
    os << n << " x " << m << " atoms exceeds cap " << support_cap;
    throw Error(ErrorCode::SupportBlowup, os.str());
  }
  std::vector<State> points;
  std::vector<double> weights;
  points.reserve(n * m);
  weights.reserve(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = mu.point(i);
    const auto action = rule(x);
    for (std::size_t j = 0; j < m; ++j) {
      points.push_back(transition(x, action, noise.point(j)));
      weights.push_back(mu.weight(i) * noise.weight(j));
    }
  }
  return BasicMeasure<State>::trusted(std::move(points), std::move(weights));
}

/// CSV rows "point,weight" for a scalar measure.
inline std::string to_csv(const DiscreteMeasure& mu, int precision = 17) {
  std::ostringstream os;
  os.precision(precision);
  os << "point,weight\n";
  for (std::size_t i = 0; i < mu.size(); ++i) os << mu.point(i) << ',' << mu.weight(i) << '\n';
  return os.str();
}

/// Affine decision rule x -> (slope * x + intercept) * direction.
///
/// Two forms are distinguished. The target form (kappa - x) * v used by the
/// mean-variance solvers has slope -1 and intercept kappa. The linear form
/// m * x + t used by the LQ solver has a one-dimensional direction equal to 1;
/// it also covers constant vector rules (slope 0).
class AffineRule {
 public:
  enum class Form { Target, Linear };

  AffineRule() : AffineRule(Form::Linear, 0.0, 0.0, Eigen::VectorXd::Ones(1)) {}

  static AffineRule target(double kappa, Eigen::VectorXd direction) {
    return AffineRule(Form::Target, -1.0, kappa, std::move(direction));
  }

  static AffineRule linear(double slope, double intercept) {
    return AffineRule(Form::Linear, slope, intercept, Eigen::VectorXd::Ones(1));
  }

  /// slope * x + intercept scaling a fixed direction vector.
  static AffineRule linear(double slope, double intercept, Eigen::VectorXd direction) {
    return AffineRule(Form::Linear, slope, intercept, std::move(direction));
  }

  static AffineRule zero(Eigen::Index dim = 1) { return linear(0.0, 0.0, Eigen::VectorXd::Ones(dim)); }

  Form form() const noexcept { return form_; }
  double slope() const noexcept { return slope_; }
  double intercept() const noexcept { return intercept_; }
  /// Target level; equals the intercept for the target form.
  double kappa() const noexcept { return intercept_; }
  const Eigen::VectorXd& direction() const noexcept { return direction_; }
  Eigen::Index dimension() const noexcept { return direction_.size(); }

  double multiplier(double x) const { return slope_ * x + intercept_; }

  Eigen::VectorXd operator()(double x) const { return multiplier(x) * direction_; }

  double scalar(double x) const {
    if (direction_.size() != 1) throw Error(ErrorCode::InvalidArgument, "scalar action of a vector rule");
    return multiplier(x) * direction_(0);
  }

 private:
  AffineRule(Form form, double slope, double intercept, Eigen::VectorXd direction)
      : form_(form), slope_(slope), intercept_(intercept), direction_(std::move(direction)) {
    if (!std::isfinite(slope_) || !std::isfinite(intercept_) || !direction_.allFinite() || direction_.size() == 0)
      throw Error(ErrorCode::InvalidArgument, "affine rule entries must be finite");
  }

  Form form_;
  double slope_;
  double intercept_;
  Eigen::VectorXd direction_;
};

}  // namespace popmdp
