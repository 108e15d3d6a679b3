#pragma once

// Path simulation of the original (non-lifted) processes under fixed rule
// sequences, with plug-in objective estimators and delta-method standard errors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "popmdp/builtin_specs.hpp"
#include "popmdp/errors.hpp"
#include "popmdp/market.hpp"
#include "popmdp/measures.hpp"
#include "popmdp/population_engine.hpp"
#include "popmdp/rng.hpp"

namespace popmdp {

struct SimConfig {
  std::size_t n_paths = 100'000;
  std::uint64_t seed = 0;
  /// Pairs paths (2j, 2j+1) on opposite atoms; only for symmetric two-point noise.
  bool antithetic = false;
  unsigned threads = 1;
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

namespace detail {

inline void validate(const SimConfig& cfg) {
  if (cfg.n_paths < 2) throw Error(ErrorCode::TooFewSamples, "need at least two paths");
  if (cfg.antithetic && cfg.n_paths % 2 != 0) throw Error(ErrorCode::InvalidArgument, "antithetic sampling needs an even path count");
}

template <class T>
class AtomSampler {
 public:
  explicit AtomSampler(const BasicMeasure<T>& mu) : mu_(&mu) {
    double acc = 0.0;
    cdf_.reserve(mu.size());
    for (double w : mu.weights()) cdf_.push_back(acc += w);
  }

  std::size_t index(double u) const {
    const double target = u * cdf_.back();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

  const T& point(std::size_t i) const { return mu_->point(i); }

 private:
  const BasicMeasure<T>* mu_;
  std::vector<double> cdf_;
};

template <class T>
bool is_symmetric_two_point(const BasicMeasure<T>& mu) {
  return mu.size() == 2 && std::abs(mu.weight(0) - 0.5) <= 1e-12 && std::abs(mu.weight(1) - 0.5) <= 1e-12;
}

/// Runs fn(begin, end) over [0, count) split into contiguous chunks.
template <class Fn>
void parallel_chunks(std::size_t count, unsigned threads, Fn&& fn) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(count, w * chunk);
    const std::size_t end = std::min(count, begin + chunk);
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

inline double sample_std_error(std::span<const double> units) {
  const auto n = units.size();
  double m = 0.0;
  for (double u : units) m += u;
  m /= static_cast<double>(n);
  double ss = 0.0;
  for (double u : units) ss += (u - m) * (u - m);
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

/// Averages consecutive groups of `group` entries.
inline std::vector<double> group_means(std::span<const double> values, std::size_t group) {
  if (group <= 1) return {values.begin(), values.end()};
  std::vector<double> out(values.size() / group, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < group; ++j) out[i] += values[i * group + j];
    out[i] /= static_cast<double>(group);
  }
  return out;
}

}  // namespace detail

template <class State>
struct PathSamples {
  /// states[k][p] for k = 0..N when stages are recorded, otherwise only the terminal stage.
  std::vector<std::vector<State>> states;
  std::vector<double> additive;   ///< sum of c_k(X_k, A_k) + c_N(X_N) per path
  std::vector<double> statistic;  ///< h(X_N) per path, empty without an h term
};

/// Simulates X_0 ~ mu0 and X_{n+1} = T_n(X_n, phi_n(X_n), R_{n+1}) path by path.
template <class State, class Rule, class Noise>
PathSamples<State> simulate_paths(const GeneralMDP<State, Rule, Noise>& spec, std::span<const Rule> rules,
                                  const BasicMeasure<State>& mu0, const SimConfig& cfg, bool record_stages = false) {
  spec.validate();
  detail::validate(cfg);
  const int N = spec.horizon;
  if (static_cast<int>(rules.size()) != N) throw Error(ErrorCode::LengthMismatch, "one rule per epoch required");
  if (cfg.antithetic)
    for (const auto& law : spec.noise)
      if (!detail::is_symmetric_two_point(law))
        throw Error(ErrorCode::InvalidArgument, "antithetic sampling needs symmetric two-point noise");

  const detail::AtomSampler<State> initial(mu0);
  std::vector<detail::AtomSampler<Noise>> noise;
  for (const auto& law : spec.noise) noise.emplace_back(law);

  const std::size_t P = cfg.n_paths;
  PathSamples<State> out;
  out.states.assign(record_stages ? static_cast<std::size_t>(N) + 1 : 1, std::vector<State>(P));
  out.additive.assign(P, 0.0);
  if (spec.statistic) out.statistic.assign(P, 0.0);

  detail::parallel_chunks(P, cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const bool mirrored = cfg.antithetic && (p % 2 == 1);
      const PathStream stream(cfg.seed, cfg.antithetic ? p / 2 : p);
      State x = initial.point(initial.index(stream.uniform(0)));
      if (record_stages) out.states[0][p] = x;
      double cost = 0.0;
      for (int n = 0; n < N; ++n) {
        const auto& sampler = noise[static_cast<std::size_t>(n)];
        std::size_t j = sampler.index(stream.uniform(static_cast<std::uint32_t>(n) + 1));
        if (mirrored) j = 1 - j;
        const auto action = rules[static_cast<std::size_t>(n)](x);
        if (spec.stage_cost) cost += spec.stage_cost(n, x, action);
        x = spec.transition(n, x, action, sampler.point(j));
        if (record_stages) out.states[static_cast<std::size_t>(n) + 1][p] = x;
      }
      if (spec.terminal_cost) cost += spec.terminal_cost(x);
      if (spec.statistic) out.statistic[p] = spec.statistic(x);
      out.additive[p] = cost;
      if (!record_stages) out.states[0][p] = x;
    }
  });
  return out;
}

/// Wealth at every epoch: result[k][p] = X_k on path p.
inline std::vector<std::vector<double>> simulate_mv_stages(const MarketModel& model, std::span<const AffineRule> rules,
                                                           const DiscreteMeasure& mu0, const SimConfig& cfg) {
  const auto spec = make_mean_variance_spec(model, 0.0);
  return simulate_paths(spec, rules, mu0, cfg, true).states;
}

/// Terminal wealth samples X_N.
inline std::vector<double> simulate_mv(const MarketModel& model, std::span<const AffineRule> rules,
                                       const DiscreteMeasure& mu0, const SimConfig& cfg) {
  const auto spec = make_mean_variance_spec(model, 0.0);
  return std::move(simulate_paths(spec, rules, mu0, cfg, false).states.front());
}

/// Sample variance (unbiased) minus 2 lambda times the sample mean. `group` = 2 treats
/// antithetic pairs as the independent units for the standard error.
inline Estimate estimate_mv_objective(std::span<const double> samples, double lambda, std::size_t group = 1) {
  const std::size_t n = samples.size();
  if (n < 2 || n / std::max<std::size_t>(group, 1) < 2) throw Error(ErrorCode::TooFewSamples, "need at least two samples");
  double m = 0.0;
  for (double x : samples) m += x;
  m /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - m) * (x - m);
  Estimate est;
  est.n = n;
  est.value = ss / static_cast<double>(n - 1) - 2.0 * lambda * m;
  // Linearisation of s - m^2 - 2 lambda m around the sample point, up to a constant.
  std::vector<double> influence(n);
  for (std::size_t i = 0; i < n; ++i) influence[i] = (samples[i] - m) * (samples[i] - m) - 2.0 * lambda * samples[i];
  const auto units = detail::group_means(influence, group);
  est.std_error = detail::sample_std_error(units);
  return est;
}

/// Plug-in estimate of E[additive] + G(E h(X_N)) from simulated paths; G' by central differences.
template <class State, class Rule, class Noise>
Estimate estimate_general(const GeneralMDP<State, Rule, Noise>& spec, const PathSamples<State>& samples, bool antithetic) {
  const std::size_t n = samples.additive.size();
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least two paths");
  double additive = 0.0;
  for (double a : samples.additive) additive += a;
  additive /= static_cast<double>(n);
  Estimate est;
  est.n = n;
  est.value = additive;
  double slope = 0.0;
  if (spec.statistic) {
    double hbar = 0.0;
    for (double h : samples.statistic) hbar += h;
    hbar /= static_cast<double>(n);
    est.value += spec.nonlinearity(hbar);
    const double step = 1e-4 * std::max(1.0, std::abs(hbar));
    slope = (spec.nonlinearity(hbar + step) - spec.nonlinearity(hbar - step)) / (2.0 * step);
  }
  std::vector<double> influence(n);
  for (std::size_t i = 0; i < n; ++i)
    influence[i] = samples.additive[i] + (spec.statistic ? slope * samples.statistic[i] : 0.0);
  const auto units = detail::group_means(influence, antithetic ? 2 : 1);
  est.std_error = detail::sample_std_error(units);
  return est;
}

template <class State, class Rule, class Noise>
Estimate simulate_general(const GeneralMDP<State, Rule, Noise>& spec, std::span<const Rule> rules,
                          const BasicMeasure<State>& mu0, const SimConfig& cfg) {
  return estimate_general(spec, simulate_paths(spec, rules, mu0, cfg, false), cfg.antithetic);
}

/// One value per row.
inline std::string samples_to_csv(std::span<const double> samples, int precision = 17) {
  std::ostringstream os;
  os.precision(precision);
  for (double x : samples) os << x << '\n';
  return os.str();
}

}  // namespace popmdp
