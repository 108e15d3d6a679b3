#pragma once

// JSON documents:
//   market   {"rates":[...], "assets":d, "returns":[{"points":[[...],...], "probs":[...]}, ...]}
//   measure  {"points":[...], "weights":[...]}
//   lq       {"b":..,"d":..,"sigma":..,"N":..,"x0":.. | "mu0":{measure}, "noise":{"points":[..],"probs":[..]}}
//   rules    [{"stage":n, "form":.., "kappa":.., "direction":[...], "slope":.., "intercept":..}, ...]

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "popmdp/errors.hpp"
#include "popmdp/lq_solver.hpp"
#include "popmdp/market.hpp"
#include "popmdp/measures.hpp"
#include "popmdp/mv_solver.hpp"

namespace popmdp::io {

using nlohmann::json;

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

namespace detail {

inline const json& field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw Error(ErrorCode::ParseError, std::string("missing field \"") + name + "\"");
  return j.at(name);
}

inline double number(const json& j, const char* what) {
  if (!j.is_number()) throw Error(ErrorCode::ParseError, std::string(what) + " must be a number");
  return j.get<double>();
}

inline std::vector<double> numbers(const json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, std::string(what) + " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(number(v, what));
  return out;
}

inline Eigen::VectorXd vector(const json& j, const char* what) {
  if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
  const auto xs = numbers(j, what);
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline json to_array(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace detail

inline MarketModel market_from_json(const json& j) {
  const auto rates = detail::numbers(detail::field(j, "rates"), "rates");
  const json& assets_field = detail::field(j, "assets");
  if (!assets_field.is_number_integer() || assets_field.get<int>() < 1)
    throw Error(ErrorCode::ParseError, "assets must be a positive integer");
  const int assets = assets_field.get<int>();
  const json& returns_field = detail::field(j, "returns");
  if (!returns_field.is_array()) throw Error(ErrorCode::ParseError, "returns must be an array");
  std::vector<ReturnDistribution> returns;
  for (const auto& stage : returns_field) {
    ReturnDistribution dist;
    const json& points = detail::field(stage, "points");
    if (!points.is_array()) throw Error(ErrorCode::ParseError, "points must be an array");
    for (const auto& p : points) {
      Eigen::VectorXd v = detail::vector(p, "return point");
      if (v.size() != assets) throw Error(ErrorCode::LengthMismatch, "return point dimension differs from assets");
      dist.points.push_back(std::move(v));
    }
    dist.probs = detail::numbers(detail::field(stage, "probs"), "probs");
    returns.push_back(std::move(dist));
  }
  return build_market(rates, std::move(returns));
}

inline json market_to_json(const MarketModel& model) {
  json returns = json::array();
  for (int k = 1; k <= model.horizon(); ++k) {
    json points = json::array();
    for (const auto& p : model.gross_returns(k).points) points.push_back(detail::to_array(p));
    returns.push_back({{"points", points}, {"probs", model.gross_returns(k).probs}});
  }
  return {{"rates", model.rates()}, {"assets", model.assets()}, {"returns", returns}};
}

inline DiscreteMeasure measure_from_json(const json& j) {
  return DiscreteMeasure(detail::numbers(detail::field(j, "points"), "points"),
                         detail::numbers(detail::field(j, "weights"), "weights"));
}

inline json measure_to_json(const DiscreteMeasure& mu) {
  return {{"points", mu.points()}, {"weights", mu.weights()}};
}

inline LQModel lq_from_json(const json& j) {
  const double b = detail::number(detail::field(j, "b"), "b");
  const double d = detail::number(detail::field(j, "d"), "d");
  const double sigma = detail::number(detail::field(j, "sigma"), "sigma");
  const json& n_field = detail::field(j, "N");
  if (!n_field.is_number_integer()) throw Error(ErrorCode::ParseError, "N must be an integer");
  const json& noise_field = detail::field(j, "noise");
  DiscreteMeasure noise(detail::numbers(detail::field(noise_field, "points"), "noise points"),
                        detail::numbers(detail::field(noise_field, "probs"), "noise probs"));
  DiscreteMeasure mu0 = j.contains("mu0") ? measure_from_json(j.at("mu0"))
                                          : DiscreteMeasure::dirac(detail::number(detail::field(j, "x0"), "x0"));
  return make_lq_model(b, d, sigma, n_field.get<int>(), std::move(noise), std::move(mu0));
}

inline json lq_to_json(const LQModel& m) {
  json out = {{"b", m.b}, {"d", m.d}, {"sigma", m.sigma}, {"N", m.horizon},
              {"noise", {{"points", m.noise.points()}, {"probs", m.noise.weights()}}}};
  if (is_dirac(m.mu0)) {
    out["x0"] = m.mu0.point(0);
  } else {
    out["mu0"] = measure_to_json(m.mu0);
  }
  return out;
}

/// True when the document looks like an LQ spec rather than a market model.
inline bool is_lq_document(const json& j) { return j.is_object() && j.contains("b") && !j.contains("rates"); }

inline json rule_to_json(const AffineRule& rule, int stage) {
  json out = {{"stage", stage},
              {"form", rule.form() == AffineRule::Form::Target ? "target" : "linear"},
              {"direction", detail::to_array(rule.direction())},
              {"slope", rule.slope()},
              {"intercept", rule.intercept()}};
  out["kappa"] = rule.form() == AffineRule::Form::Target ? json(rule.kappa()) : json(nullptr);
  return out;
}

inline AffineRule rule_from_json(const json& j) {
  const Eigen::VectorXd direction = detail::vector(detail::field(j, "direction"), "direction");
  const bool target = j.contains("form") ? j.at("form") == "target" : !j.value("kappa", json(nullptr)).is_null();
  if (target) return AffineRule::target(detail::number(detail::field(j, "kappa"), "kappa"), direction);
  return AffineRule::linear(detail::number(detail::field(j, "slope"), "slope"),
                            detail::number(detail::field(j, "intercept"), "intercept"), direction);
}

inline json rules_to_json(const std::vector<AffineRule>& rules) {
  json out = json::array();
  for (std::size_t n = 0; n < rules.size(); ++n) out.push_back(rule_to_json(rules[n], static_cast<int>(n)));
  return out;
}

/// Reads the "rules" array of a solution document or of a solve-mv report, ordered by "stage".
inline std::vector<AffineRule> rules_from_json(const json& j) {
  const json& doc = j.is_object() && !j.contains("rules") && j.contains("outputs") ? j.at("outputs") : j;
  const json& arr = doc.is_array() ? doc : detail::field(doc, "rules");
  if (!arr.is_array()) throw Error(ErrorCode::ParseError, "rules must be an array");
  std::vector<AffineRule> rules(arr.size());
  std::vector<bool> seen(arr.size(), false);
  for (const auto& r : arr) {
    const json& s = detail::field(r, "stage");
    if (!s.is_number_integer()) throw Error(ErrorCode::ParseError, "stage must be an integer");
    const auto stage = s.get<long long>();
    if (stage < 0 || static_cast<std::size_t>(stage) >= arr.size() || seen[static_cast<std::size_t>(stage)])
      throw Error(ErrorCode::ParseError, "rule stages must be 0..N-1 without repeats");
    seen[static_cast<std::size_t>(stage)] = true;
    rules[static_cast<std::size_t>(stage)] = rule_from_json(r);
  }
  return rules;
}

inline json measure_summary(const DiscreteMeasure& mu, int stage) {
  return {{"stage", stage}, {"mean", mean(mu)}, {"variance", variance(mu)}, {"support", mu.size()}};
}

inline json solution_to_json(const MVSolution& sol, bool with_snapshots = false) {
  json out = {{"kind", std::string(to_string(sol.kind))}, {"value", sol.value}, {"rules", rules_to_json(sol.rules)}};
  if (!sol.measures.empty()) {
    json summaries = json::array();
    for (std::size_t n = 0; n < sol.measures.size(); ++n) summaries.push_back(measure_summary(sol.measures[n], static_cast<int>(n)));
    out["measures"] = summaries;
    if (with_snapshots) {
      json snaps = json::array();
      for (std::size_t n = 0; n < sol.measures.size(); ++n) {
        json s = measure_to_json(sol.measures[n]);
        s["stage"] = n;
        snaps.push_back(s);
      }
      out["snapshots"] = snaps;
    }
  }
  return out;
}

}  // namespace popmdp::io
