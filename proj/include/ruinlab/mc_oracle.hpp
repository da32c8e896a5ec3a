#pragma once

// Independent checks on the recursions: Monte Carlo simulation of the
// surplus process and exhaustive enumeration of the outcome tree.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ruinlab/bonus_malus.hpp"
#include "ruinlab/claims.hpp"
#include "ruinlab/ruin_engine.hpp"

namespace ruinlab {

struct SimState {
  Amount surplus = 0;
  LevelIndex level = 1;
  /// By-claim delayed from the previous period; never set in period 1.
  std::optional<Amount> pending_by_claim;
};

struct MCEstimate {
  double p_hat = 0.0;
  double stderr_ = 0.0;
  std::int64_t n_paths = 0;
  double ci95_lo = 0.0;
  double ci95_hi = 0.0;
  std::uint64_t seed = 0;
  std::string rng_id;
  /// Mass beyond the sampling box, folded into one overflow cell.
  double overflow_mass = 0.0;
};

inline constexpr const char* kRngId = "mt19937_64+splitmix64/chunk16384/v1";

/// Premium trigger of one period. `delayed` says whether this period's
/// by-claim was deferred; `pending` is the amount settled from last period.
inline Amount period_trigger(Principle p, Amount x, Amount y, bool delayed, Amount pending) {
  switch (p) {
    case Principle::AggregateReported: return x + y;
    case Principle::AggregateSettled: return x + (delayed ? 0 : y) + pending;
    case Principle::ReportedCount: return (x > 0 ? 1 : 0) + (y > 0 ? 1 : 0);
    case Principle::SettledCount:
      return (x > 0 ? 1 : 0) + (y > 0 && !delayed ? 1 : 0) + (pending > 0 ? 1 : 0);
  }
  return 0;
}

/// Advances one period. Returns false on ruin (surplus below zero after
/// the settlement), leaving `s` at the post-settlement surplus.
inline bool step(SimState& s, const RuinQuery& q, Amount x, Amount y, bool delayed) {
  const Amount pending = s.pending_by_claim.value_or(0);
  const Amount settled = x + (delayed ? 0 : y) + pending;
  s.surplus += q.scale.premium(s.level) - settled;
  if (s.surplus < 0) return false;
  s.level = q.rules.apply(s.level, period_trigger(q.principle, x, y, delayed, pending));
  s.pending_by_claim = delayed ? std::optional<Amount>(y) : std::nullopt;
  return true;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Inverse-CDF sampler over the cutoff box, with a guide table to start
/// the search near the answer.
class JointSampler {
 public:
  explicit JointSampler(const JointClaimPMF& d) {
    double acc = 0.0;
    d.for_each_in_box([&](Amount x, Amount y, double p) {
      acc += p;
      cells_.push_back({x, y});
      cum_.push_back(acc);
    });
    overflow_ = std::max(0.0, 1.0 - acc);
    if (overflow_ > 0.0) {
      cells_.push_back({d.x_cutoff() + 1, 0});
      cum_.push_back(1.0);
    }
    cum_.back() = 1.0;
    guide_.resize(cum_.size());
    std::size_t k = 0;
    for (std::size_t g = 0; g < guide_.size(); ++g) {
      const double t = static_cast<double>(g) / static_cast<double>(guide_.size());
      while (cum_[k] <= t) ++k;
      guide_[g] = k;
    }
  }

  std::pair<Amount, Amount> draw(double u) const {
    auto k = guide_[std::min(guide_.size() - 1,
                             static_cast<std::size_t>(u * static_cast<double>(guide_.size())))];
    while (cum_[k] <= u) ++k;
    return cells_[k];
  }

  double overflow() const { return overflow_; }

 private:
  std::vector<std::pair<Amount, Amount>> cells_;
  std::vector<double> cum_;
  std::vector<std::size_t> guide_;
  double overflow_ = 0.0;
};

inline constexpr std::int64_t kChunkPaths = 16384;

}  // namespace detail

/// Monte Carlo estimate of psi_{i0}(u0, horizon). Paths are split into
/// fixed chunks with their own derived stream, so the estimate does not
/// depend on the number of workers.
inline MCEstimate simulate(const RuinQuery& query, std::int64_t n_paths, std::uint64_t seed,
                           unsigned workers = 1) {
  if (n_paths < 1) throw std::invalid_argument("paths must be ≥ 1");
  query.validate();
  const detail::JointSampler sampler(query.dist);
  const std::int64_t chunks = (n_paths + detail::kChunkPaths - 1) / detail::kChunkPaths;
  std::vector<std::int64_t> ruined(static_cast<std::size_t>(chunks), 0);

  auto run_chunk = [&](std::int64_t c) {
    std::uint64_t mix = seed ^ (0xD1B54A32D192ED03ULL * static_cast<std::uint64_t>(c + 1));
    std::mt19937_64 g(detail::splitmix64(mix));
    const std::int64_t begin = c * detail::kChunkPaths;
    const std::int64_t end = std::min(n_paths, begin + detail::kChunkPaths);
    std::int64_t hits = 0;
    for (std::int64_t path = begin; path < end; ++path) {
      if (query.u0 < 0) {
        ++hits;
        continue;
      }
      SimState s{query.u0, query.i0, std::nullopt};
      for (int t = 0; t < query.horizon; ++t) {
        const auto [x, y] = sampler.draw(detail::uniform01(g));
        const bool delayed = y > 0 && detail::uniform01(g) < query.q;
        if (!step(s, query, x, y, delayed)) {
          ++hits;
          break;
        }
      }
    }
    ruined[static_cast<std::size_t>(c)] = hits;
  };

  const auto w = std::max<unsigned>(1, std::min<unsigned>(workers, static_cast<unsigned>(chunks)));
  if (w == 1) {
    for (std::int64_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < w; ++t) {
      pool.emplace_back([&] {
        for (auto c = next++; c < chunks; c = next++) run_chunk(c);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::int64_t total = 0;
  for (auto h : ruined) total += h;
  MCEstimate e;
  e.n_paths = n_paths;
  e.seed = seed;
  e.rng_id = kRngId;
  e.overflow_mass = sampler.overflow();
  e.p_hat = static_cast<double>(total) / static_cast<double>(n_paths);
  e.stderr_ = std::sqrt(e.p_hat * (1.0 - e.p_hat) / static_cast<double>(n_paths));
  e.ci95_lo = std::clamp(e.p_hat - 1.96 * e.stderr_, 0.0, 1.0);
  e.ci95_hi = std::clamp(e.p_hat + 1.96 * e.stderr_, 0.0, 1.0);
  return e;
}

inline constexpr double kDefaultEnumerationBudget = 1e8;

/// Number of leaves visited by exact_enumerate (upper bound: every path
/// survives to the horizon).
inline double enumeration_work(const RuinQuery& query) {
  const auto support = query.dist.finite_support();
  double factor = 0.0;
  const bool coin = query.q > 0.0 && query.q < 1.0;
  for (const auto& e : support) factor += (e.y > 0 && coin) ? 2.0 : 1.0;
  double total = 0.0;
  double level = 1.0;
  for (int t = 0; t < query.horizon; ++t) {
    level *= factor;
    total += level;
  }
  return total;
}

/// Exact ruin probability within `horizon` periods from an arbitrary
/// state, by summing path probabilities over every (X_t, Y_t, delay_t)
/// sequence. A pending by-claim in `start` gives psi'. Finite-support
/// distributions only.
inline double enumerate_from(const RuinQuery& query, const SimState& start,
                             double budget = kDefaultEnumerationBudget) {
  query.validate();
  query.scale.check(start.level);
  if (start.surplus < 0) return 1.0;
  if (query.horizon == 0) return 0.0;
  const auto support = query.dist.finite_support();
  if (support.empty()) {
    throw std::invalid_argument("exact enumeration needs a finite-support distribution");
  }
  const double work = enumeration_work(query);
  if (work > budget) {
    throw std::invalid_argument("exact enumeration: about " + std::to_string(work) +
                                " branches needed, budget is " + std::to_string(budget));
  }
  const double q = query.q;
  auto rec = [&](auto&& self, const SimState& s, int remaining) -> double {
    if (remaining == 0) return 0.0;
    double ruin = 0.0;
    for (const auto& e : support) {
      for (int delayed = 0; delayed < 2; ++delayed) {
        double w = e.p;
        if (e.y > 0) {
          w *= delayed ? q : 1.0 - q;
        } else if (delayed) {
          continue;
        }
        if (w == 0.0) continue;
        SimState next = s;
        if (!step(next, query, e.x, e.y, delayed != 0)) {
          ruin += w;
        } else {
          ruin += w * self(self, next, remaining - 1);
        }
      }
    }
    return ruin;
  };
  return rec(rec, start, query.horizon);
}

/// Exact psi_{i0}(u0, horizon).
inline double exact_enumerate(const RuinQuery& query,
                              double budget = kDefaultEnumerationBudget) {
  return enumerate_from(query, SimState{query.u0, query.i0, std::nullopt}, budget);
}

}  // namespace ruinlab
