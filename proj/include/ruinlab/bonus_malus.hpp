#pragma once

// Premium scales, transition rules and the premium-level Markov chain.

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ruinlab/claims.hpp"

namespace ruinlab {

/// 1-based index into a premium scale.
using LevelIndex = int;

enum class Principle { AggregateReported, AggregateSettled, ReportedCount, SettledCount };

inline constexpr Principle kAllPrinciples[] = {
    Principle::AggregateReported, Principle::AggregateSettled,
    Principle::ReportedCount, Principle::SettledCount};

inline std::string_view to_string(Principle p) {
  switch (p) {
    case Principle::AggregateReported: return "aggregate_reported";
    case Principle::AggregateSettled: return "aggregate_settled";
    case Principle::ReportedCount: return "reported_count";
    case Principle::SettledCount: return "settled_count";
  }
  return "unknown";
}

inline Principle parse_principle(std::string_view s) {
  for (auto p : kAllPrinciples) {
    if (to_string(p) == s) return p;
  }
  throw std::invalid_argument("unknown principle '" + std::string(s) +
                              "' (expected aggregate_reported, aggregate_settled, "
                              "reported_count or settled_count)");
}

inline bool is_count_principle(Principle p) {
  return p == Principle::ReportedCount || p == Principle::SettledCount;
}

inline bool is_settled_principle(Principle p) {
  return p == Principle::AggregateSettled || p == Principle::SettledCount;
}

/// Ordered premium levels c_1 < ... < c_l.
class PremiumScale {
 public:
  PremiumScale() = default;
  explicit PremiumScale(std::vector<Amount> levels) : levels_(std::move(levels)) {
    if (levels_.empty()) throw std::invalid_argument("premium scale needs at least one level");
    for (std::size_t k = 0; k < levels_.size(); ++k) {
      if (levels_[k] < 1) throw std::invalid_argument("premium levels must be >= 1");
      if (k > 0 && levels_[k] <= levels_[k - 1]) {
        throw std::invalid_argument("premium levels must be strictly increasing");
      }
    }
  }

  int size() const { return static_cast<int>(levels_.size()); }
  /// Premium at 1-based level i.
  Amount premium(LevelIndex i) const {
    check(i);
    return levels_[static_cast<std::size_t>(i - 1)];
  }
  Amount max_premium() const { return levels_.back(); }
  const std::vector<Amount>& levels() const { return levels_; }

  void check(LevelIndex i) const {
    if (i < 1 || i > size()) {
      throw std::domain_error("level index " + std::to_string(i) + " outside [1," +
                              std::to_string(size()) + "]");
    }
  }

 private:
  std::vector<Amount> levels_;
};

/// One row of a tabulated rule: at level `from`, triggers in
/// [s_min, s_max] lead to level `to`. An empty s_max is open-ended.
struct RuleTableEntry {
  LevelIndex from = 1;
  Amount s_min = 0;
  std::optional<Amount> s_max;
  LevelIndex to = 1;
};

/// Deterministic transition rules t_ij(s): every (level, trigger) pair maps
/// to exactly one destination level.
class RuleSet {
 public:
  enum class Kind { Threshold, Table, Custom };

  /// s <= down_max: one level down (floor 1); s <= stay_max: stay;
  /// otherwise one level up (cap l).
  static RuleSet threshold(Amount down_max, Amount stay_max, int level_count) {
    if (down_max < -1 || stay_max < down_max) {
      throw std::invalid_argument("threshold rule needs -1 <= down_max <= stay_max");
    }
    check_count(level_count);
    RuleSet r;
    r.kind_ = Kind::Threshold;
    r.levels_ = level_count;
    r.down_max_ = down_max;
    r.stay_max_ = stay_max;
    r.saturation_ = stay_max + 1;
    return r;
  }

  /// Tabulated rule. For every level the ranges must cover all s >= 0
  /// exactly once.
  static RuleSet table(std::vector<RuleTableEntry> entries, int level_count) {
    check_count(level_count);
    RuleSet r;
    r.kind_ = Kind::Table;
    r.levels_ = level_count;
    Amount saturation = 0;
    for (LevelIndex i = 1; i <= level_count; ++i) {
      std::vector<RuleTableEntry> rows;
      for (const auto& e : entries) {
        if (e.from < 1 || e.from > level_count || e.to < 1 || e.to > level_count) {
          throw std::invalid_argument("rule table: level outside scale");
        }
        if (e.s_min < 0 || (e.s_max && *e.s_max < e.s_min)) {
          throw std::invalid_argument("rule table: empty or negative trigger range");
        }
        if (e.from == i) rows.push_back(e);
      }
      std::sort(rows.begin(), rows.end(),
                [](const auto& a, const auto& b) { return a.s_min < b.s_min; });
      Amount next = 0;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].s_min != next) {
          throw std::invalid_argument("rule table: level " + std::to_string(i) +
                                      " has a gap or overlap at trigger " +
                                      std::to_string(std::min(next, rows[k].s_min)));
        }
        if (!rows[k].s_max) {
          if (k + 1 != rows.size()) {
            throw std::invalid_argument("rule table: open-ended range must be last");
          }
          next = -1;
          saturation = std::max(saturation, rows[k].s_min);
          break;
        }
        next = *rows[k].s_max + 1;
      }
      if (next != -1) {
        throw std::invalid_argument("rule table: level " + std::to_string(i) +
                                    " does not cover all triggers (needs an "
                                    "open-ended last range)");
      }
    }
    r.table_ = std::move(entries);
    r.saturation_ = saturation;
    return r;
  }

  /// Arbitrary deterministic map. `saturation` must satisfy
  /// map(i, s) == map(i, saturation) for all s >= saturation.
  static RuleSet custom(std::function<LevelIndex(LevelIndex, Amount)> map,
                        Amount saturation, int level_count) {
    check_count(level_count);
    if (saturation < 0) throw std::invalid_argument("custom rule: saturation must be >= 0");
    RuleSet r;
    r.kind_ = Kind::Custom;
    r.levels_ = level_count;
    r.custom_ = std::move(map);
    r.saturation_ = saturation;
    return r;
  }

  Kind kind() const { return kind_; }
  int level_count() const { return levels_; }
  /// Smallest S with apply(i, s) == apply(i, S) for all levels and s >= S.
  Amount saturation() const { return saturation_; }
  Amount down_max() const { return down_max_; }
  Amount stay_max() const { return stay_max_; }
  const std::vector<RuleTableEntry>& table_entries() const { return table_; }

  LevelIndex apply(LevelIndex i, Amount s) const {
    if (i < 1 || i > levels_) {
      throw std::domain_error("rule_apply: level " + std::to_string(i) + " outside [1," +
                              std::to_string(levels_) + "]");
    }
    if (s < 0) throw std::domain_error("rule_apply: trigger must be non-negative");
    switch (kind_) {
      case Kind::Threshold:
        if (s <= down_max_) return std::max(i - 1, 1);
        if (s <= stay_max_) return i;
        return std::min(i + 1, levels_);
      case Kind::Table:
        for (const auto& e : table_) {
          if (e.from == i && s >= e.s_min && (!e.s_max || s <= *e.s_max)) return e.to;
        }
        break;
      case Kind::Custom: {
        const LevelIndex j = custom_(i, std::min(s, saturation_));
        if (j < 1 || j > levels_) throw std::domain_error("custom rule returned invalid level");
        return j;
      }
    }
    throw std::logic_error("rule table is not total");
  }

 private:
  static void check_count(int n) {
    if (n < 1) throw std::invalid_argument("rules need at least one level");
  }

  Kind kind_ = Kind::Threshold;
  int levels_ = 1;
  Amount down_max_ = 0;
  Amount stay_max_ = 0;
  Amount saturation_ = 0;
  std::vector<RuleTableEntry> table_;
  std::function<LevelIndex(LevelIndex, Amount)> custom_;
};

inline LevelIndex rule_apply(const RuleSet& rules, LevelIndex i, Amount s) {
  return rules.apply(i, s);
}

/// Lookup table of apply(i, s) for s in [0, saturation], 0-based level rows.
class RuleLookup {
 public:
  explicit RuleLookup(const RuleSet& rules)
      : levels_(rules.level_count()), width_(rules.saturation() + 1) {
    dest_.resize(static_cast<std::size_t>(levels_ * width_));
    for (int i = 0; i < levels_; ++i) {
      for (Amount s = 0; s < width_; ++s) {
        dest_[static_cast<std::size_t>(i * width_ + s)] = rules.apply(i + 1, s) - 1;
      }
    }
  }
  /// 0-based destination for 0-based level i.
  int operator()(int i, Amount s) const {
    return dest_[static_cast<std::size_t>(i * width_ + std::min(s, width_ - 1))];
  }
  Amount saturation() const { return width_ - 1; }

 private:
  int levels_;
  Amount width_;
  std::vector<int> dest_;
};

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One-step premium-level transition matrix for a reported-experience
/// trigger. Settled triggers give a time-inhomogeneous chain and are rejected.
inline Matrix transition_matrix(const JointClaimPMF& d, const RuleSet& rules,
                                Principle trigger) {
  if (is_settled_principle(trigger)) {
    throw std::invalid_argument(
        "no one-step transition matrix for " + std::string(to_string(trigger)) +
        ": premiums driven by settled claims depend on the by-claim delayed from "
        "the previous period, so the premium-level chain is not time-homogeneous");
  }
  const Amount sat = rules.saturation();
  // trigger_mass[s] = P(trigger = s) for s < sat; the last slot holds P(trigger >= sat).
  std::vector<double> trigger_mass(static_cast<std::size_t>(sat + 1), 0.0);
  if (trigger == Principle::AggregateReported) {
    double below = 0.0;
    for (Amount s = 0; s < sat; ++s) {
      double m = 0.0;
      for (Amount x = 0; x <= s; ++x) m += d.pmf(x, s - x);
      trigger_mass[static_cast<std::size_t>(s)] = m;
      below += m;
    }
    trigger_mass[static_cast<std::size_t>(sat)] = 1.0 - below;
  } else {
    const double p0 = d.pmf(0, 0);
    const double fy0 = d.marginal_y(0);
    const double counts[3] = {p0, fy0 - p0, 1.0 - fy0};
    for (Amount s = 0; s < 3; ++s) {
      trigger_mass[static_cast<std::size_t>(std::min(s, sat))] += counts[s];
    }
  }
  const int l = rules.level_count();
  Matrix p = Matrix::Zero(l, l);
  for (LevelIndex i = 1; i <= l; ++i) {
    for (Amount s = 0; s <= sat; ++s) {
      p(i - 1, rules.apply(i, s) - 1) += trigger_mass[static_cast<std::size_t>(s)];
    }
  }
  return p;
}

namespace detail {

inline std::vector<bool> reachable(const Matrix& p, bool transpose) {
  const auto n = p.rows();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<Eigen::Index> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const auto a = stack.back();
    stack.pop_back();
    for (Eigen::Index b = 0; b < n; ++b) {
      const double w = transpose ? p(b, a) : p(a, b);
      if (w > 0.0 && !seen[static_cast<std::size_t>(b)]) {
        seen[static_cast<std::size_t>(b)] = true;
        stack.push_back(b);
      }
    }
  }
  return seen;
}

}  // namespace detail

/// Stationary vector pi of an irreducible row-stochastic matrix: pi P = pi,
/// sum(pi) = 1. Solved directly with the normalisation replacing one
/// balance equation.
inline Vector stationary_distribution(const Matrix& p) {
  if (p.rows() != p.cols() || p.rows() == 0) {
    throw std::invalid_argument("stationary_distribution: matrix must be square");
  }
  const auto n = p.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((p.row(i).array() < 0.0).any() || std::abs(p.row(i).sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("stationary_distribution: row " + std::to_string(i + 1) +
                                  " is not a probability vector");
    }
  }
  const auto fwd = detail::reachable(p, false);
  const auto back = detail::reachable(p, true);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!fwd[static_cast<std::size_t>(i)] || !back[static_cast<std::size_t>(i)]) {
      throw std::invalid_argument(
          "stationary_distribution: chain is reducible (level " + std::to_string(i + 1) +
          " does not communicate with level 1); no unique stationary vector");
    }
  }
  Matrix a = p.transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Vector b = Vector::Zero(n);
  b(n - 1) = 1.0;
  Vector pi = a.partialPivLu().solve(b);
  return pi;
}

inline double expected_premium(const Vector& pi, const PremiumScale& scale) {
  if (pi.size() != scale.size()) {
    throw std::domain_error("expected_premium: vector length " + std::to_string(pi.size()) +
                            " does not match " + std::to_string(scale.size()) + " levels");
  }
  double e = 0.0;
  for (int k = 0; k < scale.size(); ++k) {
    e += pi(k) * static_cast<double>(scale.levels()[static_cast<std::size_t>(k)]);
  }
  return e;
}

}  // namespace ruinlab
