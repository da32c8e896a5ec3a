#pragma once

// JSON configuration for distributions, rules, queries and sweeps.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruinlab/bonus_malus.hpp"
#include "ruinlab/claims.hpp"
#include "ruinlab/experiments.hpp"
#include "ruinlab/ruin_engine.hpp"

namespace ruinlab {

using Json = nlohmann::json;

/// Any schema or value problem in a config file.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void only_keys(const Json& j, std::initializer_list<const char*> allowed, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(std::string(where) + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
T get(const Json& j, const char* key, const char* where) {
  if (!j.contains(key)) throw ConfigError(std::string(where) + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string(where) + ": bad '" + key + "': " + e.what());
  }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, const char* where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

}  // namespace detail

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// A distribution is either "H"/"M"/"L", a path to a JSON file holding a
/// distribution object, or an inline object
/// {family, p?, r?, weight?, left?, right?, table?, truncation_epsilon?}.
inline JointClaimPMF parse_distribution(const Json& j, const std::filesystem::path& base = {},
                                        std::optional<double> epsilon_override = std::nullopt) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "H" || s == "M" || s == "L") {
      const auto& c = ScenarioCatalog::standard();
      if (!epsilon_override) return c.distribution(s[0]);
      const auto h = JointClaimPMF::geometric_h(1.0 / 6.0, *epsilon_override);
      const auto l = JointClaimPMF::geometric_l(1.0 / 6.0, 1.0 / 7.0, *epsilon_override);
      if (s == "H") return h;
      if (s == "L") return l;
      return JointClaimPMF::mixture(0.5, h, l, *epsilon_override);
    }
    const auto path = base.empty() ? std::filesystem::path(s) : base / s;
    return parse_distribution(read_json_file(path), path.parent_path(), epsilon_override);
  }
  if (!j.is_object()) throw ConfigError("distribution: expected a name or an object");
  const char* where = "distribution";
  detail::only_keys(j, {"family", "p", "r", "weight", "left", "right", "table", "truncation_epsilon"},
                    where);
  const auto family = detail::get<std::string>(j, "family", where);
  const double eps = epsilon_override.value_or(
      detail::get_or<double>(j, "truncation_epsilon", kDefaultTruncationEpsilon, where));
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("truncation_epsilon must lie in (0,1)");
  try {
    if (family == "geometric_h") {
      return JointClaimPMF::geometric_h(detail::get_or<double>(j, "p", 1.0 / 6.0, where), eps);
    }
    if (family == "geometric_l") {
      return JointClaimPMF::geometric_l(detail::get_or<double>(j, "p", 1.0 / 6.0, where),
                                        detail::get_or<double>(j, "r", 1.0 / 7.0, where), eps);
    }
    if (family == "mixture") {
      const auto w = detail::get<double>(j, "weight", where);
      auto left = j.contains("left") ? parse_distribution(j["left"], base, eps)
                                     : JointClaimPMF::geometric_h(1.0 / 6.0, eps);
      auto right = j.contains("right") ? parse_distribution(j["right"], base, eps)
                                       : JointClaimPMF::geometric_l(1.0 / 6.0, 1.0 / 7.0, eps);
      return JointClaimPMF::mixture(w, std::move(left), std::move(right), eps);
    }
    if (family == "table") {
      const auto rows = detail::get<std::vector<std::vector<double>>>(j, "table", where);
      std::vector<TableEntry> entries;
      for (const auto& r : rows) {
        if (r.size() != 3) throw ConfigError("distribution table rows must be [x, y, p]");
        if (r[0] != std::floor(r[0]) || r[1] != std::floor(r[1])) {
          throw ConfigError("distribution table: claim amounts must be integers");
        }
        entries.push_back({static_cast<Amount>(r[0]), static_cast<Amount>(r[1]), r[2]});
      }
      return JointClaimPMF::table(entries, eps);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("distribution: unknown family '" + family + "'");
}

/// {kind: "threshold", down_max, stay_max} or
/// {kind: "table", entries: [[i, s_min, s_max|null, j], ...]}.
inline RuleSet parse_rules(const Json& j, int levels) {
  if (!j.is_object()) throw ConfigError("rules: expected an object");
  const char* where = "rules";
  const auto kind = detail::get<std::string>(j, "kind", where);
  try {
    if (kind == "threshold") {
      detail::only_keys(j, {"kind", "down_max", "stay_max"}, where);
      return RuleSet::threshold(detail::get<Amount>(j, "down_max", where),
                                detail::get<Amount>(j, "stay_max", where), levels);
    }
    if (kind == "table") {
      detail::only_keys(j, {"kind", "entries"}, where);
      std::vector<RuleTableEntry> entries;
      for (const auto& e : detail::get<Json>(j, "entries", where)) {
        if (!e.is_array() || e.size() != 4) {
          throw ConfigError("rules: table entries must be [i, s_min, s_max|null, j]");
        }
        RuleTableEntry r;
        r.from = e[0].get<LevelIndex>();
        r.s_min = e[1].get<Amount>();
        if (!e[2].is_null()) r.s_max = e[2].get<Amount>();
        r.to = e[3].get<LevelIndex>();
        entries.push_back(r);
      }
      return RuleSet::table(std::move(entries), levels);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("rules: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("rules: unknown kind '" + kind + "'");
}

inline PremiumScale parse_scale(const Json& j) {
  try {
    return PremiumScale(j.get<std::vector<Amount>>());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("scale: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline Principle parse_principle_field(const Json& j) {
  try {
    return parse_principle(j.get<std::string>());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("principle: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

enum class Emit { Value, Grid };

struct QueryConfig {
  RuinQuery query;
  Emit emit = Emit::Value;
};

/// Query file. Missing scale/rules/level0/horizon default to the standard
/// study settings (rules chosen by principle).
inline QueryConfig parse_query(const Json& j, const std::filesystem::path& base = {},
                               std::optional<double> epsilon_override = std::nullopt) {
  if (!j.is_object()) throw ConfigError("query: expected an object");
  const char* where = "query";
  detail::only_keys(j, {"principle", "distribution", "q", "scale", "rules", "u0", "level0",
                        "horizon", "emit", "truncation_epsilon"},
                    where);
  const auto& cat = ScenarioCatalog::standard();
  QueryConfig c;
  auto& q = c.query;
  q.principle = parse_principle_field(detail::get<Json>(j, "principle", where));
  if (!epsilon_override && j.contains("truncation_epsilon")) {
    epsilon_override = detail::get<double>(j, "truncation_epsilon", where);
  }
  q.dist = parse_distribution(detail::get<Json>(j, "distribution", where), base, epsilon_override);
  q.q = detail::get<double>(j, "q", where);
  q.scale = j.contains("scale") ? parse_scale(j["scale"]) : cat.scale();
  q.rules = j.contains("rules") ? parse_rules(j["rules"], q.scale.size()) : cat.rules_for(q.principle);
  q.u0 = detail::get<Amount>(j, "u0", where);
  q.i0 = detail::get_or<LevelIndex>(j, "level0", cat.initial_level(), where);
  q.horizon = detail::get_or<int>(j, "horizon", cat.horizon(), where);
  const auto emit = detail::get_or<std::string>(j, "emit", "value", where);
  if (emit == "value") {
    c.emit = Emit::Value;
  } else if (emit == "grid") {
    c.emit = Emit::Grid;
  } else {
    throw ConfigError("emit must be 'value' or 'grid'");
  }
  if (q.u0 < 0) throw ConfigError("u0 must be >= 0");
  try {
    q.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

struct SweepConfig {
  JointClaimPMF dist = JointClaimPMF::geometric_h();
  std::vector<Principle> principles;
  std::vector<double> qs;
  std::vector<Amount> us;
  PremiumScale scale{std::vector<Amount>{1}};
  RuleSet aggregate_rules = RuleSet::threshold(0, 0, 1);
  RuleSet count_rules = RuleSet::threshold(0, 0, 1);
  LevelIndex level0 = 1;
  int horizon = 0;
  std::size_t budget = 10000;

  std::size_t rows() const { return principles.size() * qs.size() * us.size(); }
};

/// {distribution, principles?: [..] (default all), q: [..],
///  u: [..] | {from, to, step}, scale?, aggregate_rules?, count_rules?,
///  level0?, horizon?, budget?}.
inline SweepConfig parse_sweep(const Json& j, const std::filesystem::path& base = {},
                               std::optional<double> epsilon_override = std::nullopt) {
  if (!j.is_object()) throw ConfigError("sweep: expected an object");
  const char* where = "sweep";
  detail::only_keys(j, {"distribution", "principles", "q", "u", "scale", "aggregate_rules",
                        "count_rules", "level0", "horizon", "budget"},
                    where);
  const auto& cat = ScenarioCatalog::standard();
  SweepConfig s;
  s.dist = parse_distribution(detail::get<Json>(j, "distribution", where), base, epsilon_override);
  if (j.contains("principles")) {
    for (const auto& p : j["principles"]) s.principles.push_back(parse_principle_field(p));
  } else {
    s.principles.assign(std::begin(kAllPrinciples), std::end(kAllPrinciples));
  }
  s.qs = detail::get<std::vector<double>>(j, "q", where);
  for (double q : s.qs) {
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("sweep: q values must lie in [0,1]");
  }
  const auto& u = detail::get<Json>(j, "u", where);
  if (u.is_array()) {
    s.us = u.get<std::vector<Amount>>();
  } else {
    const auto from = detail::get<Amount>(u, "from", "sweep.u");
    const auto to = detail::get<Amount>(u, "to", "sweep.u");
    const auto step = detail::get_or<Amount>(u, "step", 1, "sweep.u");
    if (step < 1 || to < from) throw ConfigError("sweep.u: need step >= 1 and to >= from");
    for (Amount v = from; v <= to; v += step) s.us.push_back(v);
  }
  for (Amount v : s.us) {
    if (v < 0) throw ConfigError("sweep: u values must be >= 0");
  }
  if (s.principles.empty() || s.qs.empty() || s.us.empty()) {
    throw ConfigError("sweep: principles, q and u must be non-empty");
  }
  s.scale = j.contains("scale") ? parse_scale(j["scale"]) : cat.scale();
  s.aggregate_rules = j.contains("aggregate_rules") ? parse_rules(j["aggregate_rules"], s.scale.size())
                                                    : cat.rules_for(Principle::AggregateReported);
  s.count_rules = j.contains("count_rules") ? parse_rules(j["count_rules"], s.scale.size())
                                            : cat.rules_for(Principle::ReportedCount);
  if (s.aggregate_rules.level_count() != s.scale.size() ||
      s.count_rules.level_count() != s.scale.size()) {
    throw ConfigError("sweep: rules and scale disagree on the number of levels");
  }
  s.level0 = detail::get_or<LevelIndex>(j, "level0", cat.initial_level(), where);
  s.horizon = detail::get_or<int>(j, "horizon", cat.horizon(), where);
  s.budget = detail::get_or<std::size_t>(j, "budget", s.budget, where);
  if (s.level0 < 1 || s.level0 > s.scale.size()) throw ConfigError("sweep: level0 outside scale");
  if (s.horizon < 0) throw ConfigError("sweep: horizon must be >= 0");
  if (s.rows() > s.budget) {
    throw ConfigError("sweep: " + std::to_string(s.rows()) + " cells exceed the budget of " +
                      std::to_string(s.budget));
  }
  return s;
}

}  // namespace ruinlab
