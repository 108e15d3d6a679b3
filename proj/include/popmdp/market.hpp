#pragma once

// Bond plus d risky assets over N periods. Returns and rates are indexed by
// period k = 1..N: period k runs from decision epoch k-1 to epoch k. Epochs are
// 0-based (0..N), so the action chosen at epoch n meets the return of period n+1.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "popmdp/errors.hpp"
#include "popmdp/measures.hpp"
#include "popmdp/numeric.hpp"

namespace popmdp {

/// Finite-support law of the gross return vector of one period.
struct ReturnDistribution {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> probs;
};

class MarketModel {
 public:
  int horizon() const noexcept { return static_cast<int>(rates_.size()); }
  int assets() const noexcept { return assets_; }

  /// Interest rate of period k, 1 <= k <= N.
  double rate(int k) const { return rates_.at(static_cast<std::size_t>(check(k) - 1)); }
  const std::vector<double>& rates() const noexcept { return rates_; }

  /// Gross risky returns of period k, 1 <= k <= N.
  const ReturnDistribution& gross_returns(int k) const { return returns_.at(static_cast<std::size_t>(check(k) - 1)); }

  /// Law of the relative risk R_k = gross / (1 + i_k) - 1 of period k.
  VectorMeasure relative_risk(int k) const {
    const auto& dist = gross_returns(k);
    const double growth = 1.0 + rate(k);
    std::vector<Eigen::VectorXd> points;
    points.reserve(dist.points.size());
    for (const auto& p : dist.points) points.push_back((p.array() / growth - 1.0).matrix());
    return VectorMeasure(std::move(points), dist.probs);
  }

  friend MarketModel build_market(std::vector<double> rates, std::vector<ReturnDistribution> returns);

 private:
  int check(int k) const {
    if (k < 1 || k > horizon()) throw Error(ErrorCode::InvalidArgument, "period index out of range");
    return k;
  }

  std::vector<double> rates_;
  std::vector<ReturnDistribution> returns_;
  int assets_ = 0;
};

inline MarketModel build_market(std::vector<double> rates, std::vector<ReturnDistribution> returns) {
  if (rates.size() != returns.size()) throw Error(ErrorCode::LengthMismatch, "rates and returns differ in length");
  if (rates.empty()) throw Error(ErrorCode::LengthMismatch, "horizon must be positive");
  for (double i : rates)
    if (!std::isfinite(i) || i <= -1.0) throw Error(ErrorCode::InvalidArgument, "interest rates must exceed -1");

  const auto dim = returns.front().points.empty() ? Eigen::Index{0} : returns.front().points.front().size();
  if (dim < 1) throw Error(ErrorCode::LengthMismatch, "return vectors need at least one asset");
  for (std::size_t k = 0; k < returns.size(); ++k) {
    const auto& dist = returns[k];
    if (dist.points.size() != dist.probs.size())
      throw Error(ErrorCode::LengthMismatch, "points and probs differ in length");
    if (dist.points.empty()) throw Error(ErrorCode::BadProbabilities, "empty return support");
    double total = 0.0;
    for (double p : dist.probs) {
      if (!std::isfinite(p) || p < 0.0) throw Error(ErrorCode::BadProbabilities, "negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
      std::ostringstream os;
      os << "period " << k + 1 << " probabilities sum to " << total;
      throw Error(ErrorCode::BadProbabilities, os.str());
    }
    for (const auto& point : dist.points) {
      if (point.size() != dim) throw Error(ErrorCode::LengthMismatch, "return vectors differ in dimension");
      if (!point.allFinite()) throw Error(ErrorCode::InvalidArgument, "return is not finite");
      if ((point.array() <= 0.0).any())
        throw Error(ErrorCode::NonPositiveReturn, "gross returns must be strictly positive");
    }
  }

  MarketModel model;
  model.rates_ = std::move(rates);
  model.returns_ = std::move(returns);
  model.assets_ = static_cast<int>(dim);
  return model;
}

/// Moments of the relative risk of one period.
struct PeriodMoments {
  Eigen::VectorXd mean;   ///< E R
  Eigen::MatrixXd C;      ///< E R R^T
  Eigen::MatrixXd Sigma;  ///< Cov R
  Eigen::MatrixXd Cinv;
  double ell = 0.0;       ///< (E R)^T C^{-1} E R
};

/// Per-period moments plus the epoch sequences d_0..d_N and bond prices S_0..S_N.
class StageMoments {
 public:
  int horizon() const noexcept { return static_cast<int>(periods_.size()); }

  /// Moments of period k, 1 <= k <= N.
  const PeriodMoments& period(int k) const {
    if (k < 1 || k > horizon()) throw Error(ErrorCode::InvalidArgument, "period index out of range");
    return periods_[static_cast<std::size_t>(k - 1)];
  }
  double ell(int k) const { return period(k).ell; }

  /// d_n for epoch 0 <= n <= N; d_N = 1 and d_n = d_{n+1} (1 - ell_{n+1}).
  double d(int n) const { return d_.at(static_cast<std::size_t>(n)); }
  /// Bond price S_n^0 for epoch 0 <= n <= N.
  double bond(int n) const { return bond_.at(static_cast<std::size_t>(n)); }

  const std::vector<double>& d_sequence() const noexcept { return d_; }
  const std::vector<double>& bond_sequence() const noexcept { return bond_; }

  friend StageMoments compute_moments(const MarketModel& model);

 private:
  std::vector<PeriodMoments> periods_;
  std::vector<double> d_;
  std::vector<double> bond_;
};

namespace detail {

inline void require_positive_definite(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::SingularCovariance, std::string(what) + " eigen solve failed");
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > kPdRelativeTolerance * hi)) {
    std::ostringstream os;
    os << what << " is not positive definite (eigenvalues " << lo << " .. " << hi << ")";
    throw Error(ErrorCode::SingularCovariance, os.str());
  }
}

}  // namespace detail

inline StageMoments compute_moments(const MarketModel& model) {
  const int N = model.horizon();
  const int dim = model.assets();
  StageMoments out;
  out.periods_.reserve(static_cast<std::size_t>(N));
  for (int k = 1; k <= N; ++k) {
    const VectorMeasure risk = model.relative_risk(k);
    PeriodMoments pm;
    pm.mean = Eigen::VectorXd::Zero(dim);
    pm.C = Eigen::MatrixXd::Zero(dim, dim);
    pm.Sigma = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t j = 0; j < risk.size(); ++j) {
      pm.mean += risk.weight(j) * risk.point(j);
      pm.C += risk.weight(j) * risk.point(j) * risk.point(j).transpose();
    }
    for (std::size_t j = 0; j < risk.size(); ++j) {
      const Eigen::VectorXd centred = risk.point(j) - pm.mean;
      pm.Sigma += risk.weight(j) * centred * centred.transpose();
    }
    if (pm.mean.norm() <= kZeroMeanTolerance) {
      std::ostringstream os;
      os << "period " << k << " has zero mean relative risk";
      throw Error(ErrorCode::ZeroMeanRisk, os.str());
    }
    detail::require_positive_definite(pm.Sigma, "covariance matrix");
    detail::require_positive_definite(pm.C, "second-moment matrix");
    pm.Cinv = pm.C.ldlt().solve(Eigen::MatrixXd::Identity(dim, dim));
    pm.Cinv = 0.5 * (pm.Cinv + pm.Cinv.transpose());
    pm.ell = pm.mean.dot(pm.Cinv * pm.mean);
    out.periods_.push_back(std::move(pm));
  }

  out.d_.assign(static_cast<std::size_t>(N) + 1, 1.0);
  for (int n = N - 1; n >= 0; --n)
    out.d_[static_cast<std::size_t>(n)] = out.d_[static_cast<std::size_t>(n) + 1] * (1.0 - out.periods_[static_cast<std::size_t>(n)].ell);

  out.bond_.assign(static_cast<std::size_t>(N) + 1, 1.0);
  for (int n = 0; n < N; ++n)
    out.bond_[static_cast<std::size_t>(n) + 1] = (1.0 + model.rate(n + 1)) * out.bond_[static_cast<std::size_t>(n)];
  return out;
}

/// (E R_k)^T Sigma_k^{-1} E R_k by a direct Cholesky solve.
inline double sigma_quadratic(const StageMoments& moments, int k) {
  const auto& pm = moments.period(k);
  Eigen::LLT<Eigen::MatrixXd> llt(pm.Sigma);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularCovariance, "covariance Cholesky failed");
  return pm.mean.dot(llt.solve(pm.mean));
}

}  // namespace popmdp
