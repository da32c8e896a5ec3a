#pragma once

// Random small problem instances for the property tests.

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "ruinlab/ruin_engine.hpp"

namespace ruinlab::instances {

struct InstanceShape {
  int max_values = 3;       // distinct X values and distinct Y values
  Amount max_claim = 5;
  int max_levels = 3;
  Amount max_premium = 4;
  int max_horizon = 4;
  Amount max_u0 = 5;
};

/// Table distribution with at most `max_values` distinct X and Y values.
/// Mass on (0, y>0) is never generated.
inline JointClaimPMF random_table(std::mt19937_64& g, const InstanceShape& s) {
  auto pick = [&](bool allow_zero) {
    std::set<Amount> vals;
    const int n = std::uniform_int_distribution<int>(1, s.max_values)(g);
    while (static_cast<int>(vals.size()) < n) {
      vals.insert(std::uniform_int_distribution<Amount>(allow_zero ? 0 : 0, s.max_claim)(g));
    }
    return std::vector<Amount>(vals.begin(), vals.end());
  };
  const auto xs = pick(true);
  const auto ys = pick(true);
  std::uniform_real_distribution<double> w(0.05, 1.0);
  std::vector<TableEntry> rows;
  double total = 0.0;
  for (Amount x : xs) {
    for (Amount y : ys) {
      if (x == 0 && y > 0) continue;
      if (std::bernoulli_distribution(0.3)(g)) continue;
      rows.push_back({x, y, w(g)});
      total += rows.back().p;
    }
  }
  if (rows.empty()) {
    rows.push_back({xs.back(), xs.back() == 0 ? 0 : ys.back(), 1.0});
    total = 1.0;
  }
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
    rows[k].p /= total;
    acc += rows[k].p;
  }
  rows.back().p = 1.0 - acc;
  return JointClaimPMF::table(rows);
}

inline PremiumScale random_scale(std::mt19937_64& g, const InstanceShape& s) {
  const int l = std::uniform_int_distribution<int>(1, s.max_levels)(g);
  std::set<Amount> vals;
  while (static_cast<int>(vals.size()) < l) {
    vals.insert(std::uniform_int_distribution<Amount>(1, s.max_premium + l)(g));
  }
  return PremiumScale(std::vector<Amount>(vals.begin(), vals.end()));
}

inline RuleSet random_threshold(std::mt19937_64& g, Principle p, int levels) {
  const Amount top = is_count_principle(p) ? 3 : 8;
  const Amount a = std::uniform_int_distribution<Amount>(-1, top)(g);
  const Amount b = std::uniform_int_distribution<Amount>(a, top + 1)(g);
  return RuleSet::threshold(a, b, levels);
}

inline RuinQuery random_query(std::mt19937_64& g, Principle p, double q,
                              const InstanceShape& s = {}) {
  RuinQuery r;
  r.principle = p;
  r.dist = random_table(g, s);
  r.q = q;
  r.scale = random_scale(g, s);
  r.rules = random_threshold(g, p, r.scale.size());
  r.u0 = std::uniform_int_distribution<Amount>(0, s.max_u0)(g);
  r.i0 = std::uniform_int_distribution<LevelIndex>(1, r.scale.size())(g);
  r.horizon = std::uniform_int_distribution<int>(1, s.max_horizon)(g);
  return r;
}

}  // namespace ruinlab::instances
