#pragma once

// Non-additive finite-horizon MDP
//     E[ sum_k c_k(X_k, A_k) + c_N(X_N) ] + G( E[h(X_N)] ) -> inf
// lifted to a deterministic problem on finite measures. Decision rules are
// chosen from finite per-epoch families of measure-dependent generators and the
// lifted recursion is solved exactly along reachable measures by enumerating
// all rule sequences.

#include <cmath>
#include <cstddef>
#include <functional>
#include <future>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "popmdp/errors.hpp"
#include "popmdp/measures.hpp"
#include "popmdp/numeric.hpp"

namespace popmdp {

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

template <class State, class Rule, class Noise>
struct GeneralMDP {
  using state_type = State;
  using rule_type = Rule;
  using noise_type = Noise;
  using Action = std::invoke_result_t<const Rule&, const State&>;
  using Measure = BasicMeasure<State>;

  int horizon = 0;
  /// T_n(x, a, r) for epoch n.
  std::function<State(int, const State&, const Action&, const Noise&)> transition;
  /// Law of the noise R_{n+1} entering the transition of epoch n.
  std::vector<BasicMeasure<Noise>> noise;
  /// c_n(x, a); empty means zero.
  std::function<double(int, const State&, const Action&)> stage_cost;
  /// c_N(x); empty means zero.
  std::function<double(const State&)> terminal_cost;
  /// h and G of the non-additive term; both empty means no such term.
  std::function<double(const State&)> statistic;
  std::function<double(double)> nonlinearity;
  std::size_t support_cap = kDefaultSupportCap;

  void validate() const {
    if (horizon < 0) throw Error(ErrorCode::InvalidArgument, "negative horizon");
    if (static_cast<int>(noise.size()) != horizon) throw Error(ErrorCode::LengthMismatch, "one noise law per epoch required");
    if (horizon > 0 && !transition) throw Error(ErrorCode::InvalidArgument, "missing transition");
    if (static_cast<bool>(statistic) != static_cast<bool>(nonlinearity))
      throw Error(ErrorCode::InvalidArgument, "statistic h and nonlinearity G must be given together");
  }
};

/// hat c_n(mu, phi) = integral of c_n(x, phi(x)) against mu.
template <class State, class Rule, class Noise>
double lifted_cost(const GeneralMDP<State, Rule, Noise>& spec, const BasicMeasure<State>& mu, const Rule& rule, int n) {
  if (n < 0 || n >= spec.horizon) throw Error(ErrorCode::InvalidArgument, "stage out of range");
  if (!spec.stage_cost) return 0.0;
  const double cost = mu.integrate([&](const State& x) { return spec.stage_cost(n, x, rule(x)); });
  if (!std::isfinite(cost)) throw Error(ErrorCode::NonFiniteCost, "stage cost is not finite");
  return cost;
}

/// hat c_N(mu) = integral of c_N plus G(integral of h), with G(+inf) = +inf.
template <class State, class Rule, class Noise>
double lifted_terminal_cost(const GeneralMDP<State, Rule, Noise>& spec, const BasicMeasure<State>& mu) {
  double cost = 0.0;
  if (spec.terminal_cost) {
    cost = mu.integrate([&](const State& x) { return spec.terminal_cost(x); });
    if (!std::isfinite(cost)) throw Error(ErrorCode::NonFiniteCost, "terminal cost is not finite");
  }
  if (spec.statistic) {
    const double hmean = mu.integrate([&](const State& x) { return spec.statistic(x); });
    if (std::isnan(hmean) || hmean == -kInfiniteCost) throw Error(ErrorCode::NonFiniteCost, "terminal statistic is not finite");
    if (hmean == kInfiniteCost) return kInfiniteCost;
    const double g = spec.nonlinearity(hmean);
    if (g == kInfiniteCost) return kInfiniteCost;
    if (!std::isfinite(g)) throw Error(ErrorCode::NonFiniteCost, "nonlinearity is not finite");
    cost += g;
  }
  return cost;
}

/// Image of mu under one epoch of the original dynamics and a concrete rule.
template <class State, class Rule, class Noise>
BasicMeasure<State> lifted_transition(const GeneralMDP<State, Rule, Noise>& spec, const BasicMeasure<State>& mu,
                                      const Rule& rule, int n) {
  using Action = typename GeneralMDP<State, Rule, Noise>::Action;
  auto step = [&](const State& x, const Action& a, const Noise& r) { return spec.transition(n, x, a, r); };
  return pushforward(mu, rule, step, spec.noise[static_cast<std::size_t>(n)], spec.support_cap);
}

template <class State, class Rule>
struct PolicyTrace {
  std::vector<BasicMeasure<State>> measures;  ///< mu_0..mu_N
  std::vector<Rule> rules;                    ///< realised phi_0..phi_{N-1}
  std::vector<double> stage_costs;            ///< hat c_n(mu_n, phi_n)
  double terminal_cost = 0.0;
  std::vector<double> cost_to_go;             ///< J_{n}(mu_n) of the traced policy, n = 0..N
  double value = 0.0;
};

/// Runs the lifted dynamics for measure-dependent rules (they may ignore the measure).
template <class State, class Rule, class Noise, class Generator>
PolicyTrace<State, Rule> trace_policy(const GeneralMDP<State, Rule, Noise>& spec, std::span<const Generator> generators,
                                      const BasicMeasure<State>& mu0) {
  spec.validate();
  if (static_cast<int>(generators.size()) != spec.horizon) throw Error(ErrorCode::LengthMismatch, "one rule per epoch required");
  PolicyTrace<State, Rule> trace;
  trace.measures.push_back(mu0);
  for (int n = 0; n < spec.horizon; ++n) {
    const auto& current = trace.measures.back();
    Rule rule = generators[static_cast<std::size_t>(n)](current);
    trace.stage_costs.push_back(lifted_cost(spec, current, rule, n));
    auto next = lifted_transition(spec, current, rule, n);
    trace.rules.push_back(std::move(rule));
    trace.measures.push_back(std::move(next));
  }
  trace.terminal_cost = lifted_terminal_cost(spec, trace.measures.back());
  trace.cost_to_go.assign(static_cast<std::size_t>(spec.horizon) + 1, 0.0);
  double acc = trace.terminal_cost;
  trace.cost_to_go.back() = acc;
  for (int n = spec.horizon - 1; n >= 0; --n) {
    acc += trace.stage_costs[static_cast<std::size_t>(n)];
    trace.cost_to_go[static_cast<std::size_t>(n)] = acc;
  }
  trace.value = acc;
  return trace;
}

/// Value of a fixed sequence of concrete rules started from mu0.
template <class State, class Rule, class Noise>
double evaluate_policy(const GeneralMDP<State, Rule, Noise>& spec, std::span<const Rule> rules, const BasicMeasure<State>& mu0) {
  std::vector<std::function<Rule(const BasicMeasure<State>&)>> gens;
  gens.reserve(rules.size());
  for (const auto& r : rules) gens.push_back([r](const BasicMeasure<State>&) { return r; });
  return trace_policy<State, Rule, Noise>(spec, std::span<const std::function<Rule(const BasicMeasure<State>&)>>(gens), mu0).value;
}

template <class State, class Rule>
using MeasureRule = std::function<Rule(const BasicMeasure<State>&)>;

/// Candidate measure-dependent rules per epoch.
template <class State, class Rule>
using RuleFamily = std::vector<std::vector<MeasureRule<State, Rule>>>;

/// Wraps a concrete rule as a generator ignoring its measure argument.
template <class State, class Rule>
MeasureRule<State, Rule> constant_generator(Rule rule) {
  return [rule = std::move(rule)](const BasicMeasure<State>&) { return rule; };
}

struct EngineOptions {
  std::size_t search_cap = kDefaultSearchCap;
  unsigned threads = 1;  ///< parallel top-level branches; the result does not depend on it
};

template <class State, class Rule>
struct EngineResult {
  std::vector<std::size_t> choices;  ///< selected family index per epoch
  PolicyTrace<State, Rule> path;     ///< measures, realised rules and J_n along the optimal path
  double value = 0.0;
  std::size_t sequences_evaluated = 0;
  std::string caveat = "optimal within the declared rule families only";
};

namespace detail {

struct SearchTail {
  double cost = kInfiniteCost;
  std::vector<std::size_t> choices;
  std::size_t leaves = 0;
  bool found = false;
};

template <class State, class Rule, class Noise>
SearchTail search_from(const GeneralMDP<State, Rule, Noise>& spec, const RuleFamily<State, Rule>& family, int n,
                       const BasicMeasure<State>& mu) {
  SearchTail best;
  if (n == spec.horizon) {
    best.cost = lifted_terminal_cost(spec, mu);
    best.leaves = 1;
    best.found = true;
    return best;
  }
  const auto& candidates = family[static_cast<std::size_t>(n)];
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    Rule rule = candidates[k](mu);
    const double here = lifted_cost(spec, mu, rule, n);
    SearchTail tail = search_from(spec, family, n + 1, lifted_transition(spec, mu, rule, n));
    best.leaves += tail.leaves;
    const double total = here + tail.cost;
    // Strict comparison: equal values keep the lower index; +inf never wins over an earlier branch.
    if (!best.found || total < best.cost) {
      best.found = true;
      best.cost = total;
      best.choices.assign(1, k);
      best.choices.insert(best.choices.end(), tail.choices.begin(), tail.choices.end());
    }
  }
  return best;
}

}  // namespace detail

/// Exhaustive depth-first search over all rule sequences of the families.
/// Ties go to the lowest family index, earliest epoch first.
template <class State, class Rule, class Noise>
EngineResult<State, Rule> engine_backward(const GeneralMDP<State, Rule, Noise>& spec, const RuleFamily<State, Rule>& family,
                                          const BasicMeasure<State>& mu0, const EngineOptions& opts = {}) {
  spec.validate();
  if (static_cast<int>(family.size()) != spec.horizon) throw Error(ErrorCode::LengthMismatch, "one family per epoch required");
  std::size_t sequences = 1;
  for (const auto& stage : family) {
    if (stage.empty()) throw Error(ErrorCode::InvalidArgument, "empty rule family");
    if (sequences > opts.search_cap / stage.size()) {
      std::ostringstream os;
      os << "rule sequence count exceeds cap " << opts.search_cap;
      throw Error(ErrorCode::SearchBlowup, os.str());
    }
    sequences *= stage.size();
  }

  detail::SearchTail best;
  if (spec.horizon == 0 || opts.threads <= 1) {
    best = detail::search_from(spec, family, 0, mu0);
  } else {
    const auto& top = family.front();
    std::vector<std::future<detail::SearchTail>> branches;
    std::vector<double> heads(top.size());
    for (std::size_t k = 0; k < top.size(); ++k) {
      branches.push_back(std::async(std::launch::async, [&, k] {
        Rule rule = top[k](mu0);
        heads[k] = lifted_cost(spec, mu0, rule, 0);
        return detail::search_from(spec, family, 1, lifted_transition(spec, mu0, rule, 0));
      }));
    }
    for (std::size_t k = 0; k < top.size(); ++k) {
      detail::SearchTail tail = branches[k].get();
      best.leaves += tail.leaves;
      const double total = heads[k] + tail.cost;
      if (!best.found || total < best.cost) {
        best.found = true;
        best.cost = total;
        best.choices.assign(1, k);
        best.choices.insert(best.choices.end(), tail.choices.begin(), tail.choices.end());
      }
    }
  }

  std::vector<MeasureRule<State, Rule>> chosen;
  for (int n = 0; n < spec.horizon; ++n) chosen.push_back(family[static_cast<std::size_t>(n)][best.choices[static_cast<std::size_t>(n)]]);
  EngineResult<State, Rule> result;
  result.choices = best.choices;
  result.path = trace_policy<State, Rule, Noise>(spec, std::span<const MeasureRule<State, Rule>>(chosen), mu0);
  result.value = result.path.value;
  result.sequences_evaluated = best.leaves;
  return result;
}

// ---------------------------------------------------------------------------
// Lower bounding function checks on sample points.

struct BoundingConstants {
  double stage = 1.0;      ///< c_n bar
  double terminal = 1.0;   ///< c_N bar
  double statistic = 1.0;  ///< c_h bar
  double alpha = 1.0;      ///< alpha_b
};

struct BoundingViolation {
  int condition = 0;  ///< 1..4
  int stage = -1;     ///< epoch for conditions 1 and 4
  std::size_t state_index = 0;
  std::size_t action_index = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct BoundingReport {
  bool holds[4] = {true, true, true, true};
  /// Smallest constant satisfying each condition on the samples (where b > 0).
  double required[4] = {0.0, 0.0, 0.0, 0.0};
  std::vector<BoundingViolation> violations;

  bool all() const { return holds[0] && holds[1] && holds[2] && holds[3]; }
};

/// Evaluates the four growth conditions on sample states and actions. The actions
/// stand in for phi(x) in condition (iv). Report only; nothing is enforced.
template <class State, class Rule, class Noise, class Bound>
BoundingReport check_bounding(const GeneralMDP<State, Rule, Noise>& spec, const Bound& b,
                              std::span<const State> states,
                              std::span<const typename GeneralMDP<State, Rule, Noise>::Action> actions,
                              const BoundingConstants& constants) {
  BoundingReport report;
  auto neg = [](double v) { return v < 0.0 ? -v : 0.0; };
  auto record = [&](int cond, int stage, std::size_t si, std::size_t ai, double lhs, double bx, double constant) {
    const double rhs = constant * bx;
    if (bx > 0.0) report.required[cond - 1] = std::max(report.required[cond - 1], lhs / bx);
    if (lhs > rhs) {
      report.holds[cond - 1] = false;
      report.violations.push_back({cond, stage, si, ai, lhs, rhs});
    }
  };
  for (std::size_t si = 0; si < states.size(); ++si) {
    const State& x = states[si];
    const double bx = b(x);
    for (int n = 0; n < spec.horizon; ++n) {
      for (std::size_t ai = 0; ai < actions.size(); ++ai) {
        if (spec.stage_cost) record(1, n, si, ai, neg(spec.stage_cost(n, x, actions[ai])), bx, constants.stage);
        const double expected_b = spec.noise[static_cast<std::size_t>(n)].integrate(
            [&](const Noise& r) { return b(spec.transition(n, x, actions[ai], r)); });
        record(4, n, si, ai, expected_b, bx, constants.alpha);
      }
    }
    if (spec.terminal_cost) record(2, -1, si, 0, neg(spec.terminal_cost(x)), bx, constants.terminal);
    if (spec.statistic) record(3, -1, si, 0, neg(spec.statistic(x)), bx, constants.statistic);
  }
  return report;
}

}  // namespace popmdp
