#pragma once

// Finite-horizon ruin probabilities psi_i(u, n) by layered dynamic
// programming over the horizon, for all four premium principles.
//
// Notation used below: for a cell at level i the "funds" N are what is
// available to pay the period's settlement, i.e. surplus + c_i (minus the
// pending by-claim for the auxiliary process psi'). N < 0 means certain ruin.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ruinlab/bonus_malus.hpp"
#include "ruinlab/claims.hpp"

namespace ruinlab {

struct RuinQuery {
  Principle principle = Principle::AggregateReported;
  JointClaimPMF dist = JointClaimPMF::geometric_h();
  double q = 0.0;
  PremiumScale scale{std::vector<Amount>{1}};
  RuleSet rules = RuleSet::threshold(0, 0, 1);
  Amount u0 = 0;
  LevelIndex i0 = 1;
  int horizon = 0;

  void validate() const {
    if (!(q >= 0.0 && q <= 1.0)) {
      throw std::invalid_argument("q must lie in [0,1], got " + std::to_string(q));
    }
    if (rules.level_count() != scale.size()) {
      throw std::invalid_argument("rules cover " + std::to_string(rules.level_count()) +
                                  " levels but the scale has " +
                                  std::to_string(scale.size()));
    }
    if (i0 < 1 || i0 > scale.size()) {
      throw std::invalid_argument("initial level " + std::to_string(i0) + " outside [1," +
                                  std::to_string(scale.size()) + "]");
    }
    if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  }
};

struct SolverOptions {
  /// Keep every layer (needed for grid output and invariant checks).
  bool keep_layers = false;
  unsigned workers = 1;
};

/// psi and psi' values of one horizon slice. Only the states the
/// recursions can reach are stored; `psi`/`psi_prime` apply the boundary
/// conventions for everything else.
class DPLayer {
 public:
  DPLayer() = default;
  DPLayer(int n, Principle principle, const PremiumScale& scale, Amount u_max, Amount z_cap)
      : n_(n), principle_(principle), premiums_(scale.levels()), u_max_(u_max),
        c_max_(scale.max_premium()), z_cap_(z_cap) {
    const auto l = premiums_.size();
    psi_.assign(l * static_cast<std::size_t>(u_max_ + 1), 0.0);
    switch (principle_) {
      case Principle::AggregateReported:
      case Principle::ReportedCount:
        // psi'_i(0; z) for z in [1, c_max]
        prime_width_ = c_max_;
        psi_prime_.assign(l * static_cast<std::size_t>(prime_width_), 0.0);
        break;
      case Principle::AggregateSettled:
        // psi'_i(w + z; z) for w in [-c_max, u_max - 1], z in [1, z_cap]
        prime_width_ = u_max_ + c_max_;
        psi_prime_.assign(l * static_cast<std::size_t>(z_cap_ * prime_width_), 0.0);
        break;
      case Principle::SettledCount:
        prime_width_ = u_max_ + c_max_;
        psi_prime_.assign(l * static_cast<std::size_t>(prime_width_), 0.0);
        break;
    }
  }

  int horizon() const { return n_; }
  Principle principle() const { return principle_; }
  Amount u_max() const { return u_max_; }
  Amount z_cap() const { return z_cap_; }
  int levels() const { return static_cast<int>(premiums_.size()); }

  /// psi_i(u, n) with the conventions psi = 1 for u < 0, psi(u, 0) = 0.
  double psi(LevelIndex i, Amount u) const {
    if (u < 0) return 1.0;
    if (n_ == 0) return 0.0;
    if (u > u_max_) throw std::out_of_range("psi: surplus beyond computed grid");
    return psi_at(i - 1, u);
  }

  /// psi'_i(u; z, n) for z >= 1.
  double psi_prime(LevelIndex i, Amount u, Amount z) const {
    if (z < 1) throw std::domain_error("psi_prime: z must be >= 1");
    if (u < 0) return 1.0;
    if (n_ == 0) return 0.0;
    const Amount c = premiums_[static_cast<std::size_t>(i - 1)];
    switch (principle_) {
      case Principle::AggregateReported:
      case Principle::ReportedCount:
        if (z <= u) return psi(i, u - z);
        if (z <= u + c) return prime_reported(i - 1, z - u);
        return 1.0;
      case Principle::AggregateSettled:
        if (u - z < -c) return 1.0;
        if (u - z > u_max_ - 1) throw std::out_of_range("psi_prime: beyond computed grid");
        return prime_settled_aggregate(i - 1, u - z, std::min(z, z_cap_));
      case Principle::SettledCount:
        if (u - z < -c) return 1.0;
        if (u - z > u_max_ - 1) throw std::out_of_range("psi_prime: beyond computed grid");
        return prime_settled_count(i - 1, u - z);
    }
    return 1.0;
  }

  // Raw accessors (0-based level), used by the recursions.
  double psi_at(int i, Amount u) const {
    return psi_[static_cast<std::size_t>(i) * static_cast<std::size_t>(u_max_ + 1) +
                static_cast<std::size_t>(u)];
  }
  double& psi_at(int i, Amount u) {
    return psi_[static_cast<std::size_t>(i) * static_cast<std::size_t>(u_max_ + 1) +
                static_cast<std::size_t>(u)];
  }
  // psi'_i(0; z), 1 <= z <= c_max
  double prime_reported(int i, Amount z) const { return psi_prime_[reported_index(i, z)]; }
  double& prime_reported(int i, Amount z) { return psi_prime_[reported_index(i, z)]; }
  // psi'_i keyed by w = u - z >= -c_max and capped z
  double prime_settled_aggregate(int i, Amount w, Amount z) const {
    return psi_prime_[settled_aggregate_index(i, w, z)];
  }
  double& prime_settled_aggregate(int i, Amount w, Amount z) {
    return psi_prime_[settled_aggregate_index(i, w, z)];
  }
  double prime_settled_count(int i, Amount w) const { return psi_prime_[settled_count_index(i, w)]; }
  double& prime_settled_count(int i, Amount w) { return psi_prime_[settled_count_index(i, w)]; }

  const std::vector<double>& raw_psi() const { return psi_; }
  const std::vector<double>& raw_psi_prime() const { return psi_prime_; }

 private:
  std::size_t reported_index(int i, Amount z) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(prime_width_) +
           static_cast<std::size_t>(z - 1);
  }
  std::size_t settled_aggregate_index(int i, Amount w, Amount z) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(z_cap_) +
            static_cast<std::size_t>(z - 1)) *
               static_cast<std::size_t>(prime_width_) +
           static_cast<std::size_t>(w + c_max_);
  }
  std::size_t settled_count_index(int i, Amount w) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(prime_width_) +
           static_cast<std::size_t>(w + c_max_);
  }

  int n_ = 0;
  Principle principle_ = Principle::AggregateReported;
  std::vector<Amount> premiums_;
  Amount u_max_ = 0;
  Amount c_max_ = 0;
  Amount z_cap_ = 1;
  Amount prime_width_ = 0;
  std::vector<double> psi_;
  std::vector<double> psi_prime_;
};

struct RuinMetadata {
  Principle principle = Principle::AggregateReported;
  double q = 0.0;
  Amount u0 = 0;
  LevelIndex i0 = 1;
  int horizon = 0;
  double elapsed_seconds = 0.0;
};

struct RuinResult {
  double value = 0.0;
  /// psi_i(u, horizon) for every level (outer) and u in [0, u0] (inner).
  std::vector<std::vector<double>> surplus_profile;
  /// Layers n = 0..horizon when SolverOptions::keep_layers is set.
  std::optional<std::vector<DPLayer>> layers;
  /// Probability mass ignored by truncated infinite sums.
  double truncation_bound = 0.0;
  RuinMetadata metadata;
};

/// psi_i(u, 1) = (1 - q) sum_{y>=1} xi_y(u + c_i) + P(X > u + c_i).
inline double base_case_psi(const JointClaimPMF& d, double q, const PremiumScale& scale,
                            LevelIndex i, Amount u) {
  if (u < 0) return 1.0;
  const Amount n = u + scale.premium(i);
  return (1.0 - q) * d.xi_tail_sum(n) + d.tail_x(n);
}

/// psi'_i(u; z, n) from the reported-trigger layer: psi_i(u - z, n) when
/// z <= u, psi'_i(0; z - u, n) when u < z <= u + c_i, and 1 beyond.
inline double lemma1_reduce(Amount u, Amount z, LevelIndex i, const PremiumScale& scale,
                            const DPLayer& layer) {
  if (is_settled_principle(layer.principle())) {
    throw std::logic_error(
        "lemma1_reduce: the up-front claim changes settled-claim triggers, so psi' "
        "cannot be reduced to psi under " + std::string(to_string(layer.principle())));
  }
  if (z < 1) throw std::domain_error("lemma1_reduce: z must be >= 1");
  if (layer.horizon() == 0) return u < 0 ? 1.0 : 0.0;
  if (z <= u) return layer.psi(i, u - z);
  if (z <= u + scale.premium(i)) return layer.prime_reported(i - 1, z - u);
  return 1.0;
}

namespace detail {

template <typename Fn>
void parallel_for(Amount begin, Amount end, unsigned workers, Fn&& fn) {
  if (end <= begin) return;
  const Amount span = end - begin;
  if (workers <= 1 || span < 64) {
    for (Amount k = begin; k < end; ++k) fn(k);
    return;
  }
  const auto w = static_cast<Amount>(std::min<Amount>(workers, span));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  for (Amount t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      // Interleaved assignment; each cell is written exactly once.
      for (Amount k = begin + t; k < end; k += w) fn(k);
    });
  }
  for (auto& th : pool) th.join();
}

/// Dense precomputations over the claim distribution for sums up to `m_max`.
class ClaimGrid {
 public:
  ClaimGrid(const JointClaimPMF& d, const PremiumScale& scale, Amount m_max, Amount small)
      : m_max_(m_max) {
    const auto m1 = static_cast<std::size_t>(m_max + 1);
    f00_ = d.pmf(0, 0);
    fx0_.resize(m1);
    tail_x_.resize(m1);
    xi_tail_.resize(m1);
    for (Amount x = 0; x <= m_max; ++x) {
      fx0_[static_cast<std::size_t>(x)] = d.pmf(x, 0);
      tail_x_[static_cast<std::size_t>(x)] = d.tail_x(x);
    }
    // anti-diagonal prefix sums: anti_[m][k] = sum_{x=1}^{k} f(x, m - x)
    anti_.resize(m1 * (m1 + 1) / 2);
    for (Amount m = 0; m <= m_max; ++m) {
      double acc = 0.0;
      anti_[offset(m)] = 0.0;
      for (Amount x = 1; x <= m; ++x) {
        acc += d.pmf(x, m - x);
        anti_[offset(m) + static_cast<std::size_t>(x)] = acc;
      }
    }
    // row tails along anti-diagonals: row_tail_[x][k+1] = sum_{y>k} f(x,y)
    row_tail_.resize(m1 * (m1 + static_cast<std::size_t>(scale.max_premium()) + 1));
    rt_stride_ = m_max + scale.max_premium() + 1;
    for (Amount x = 0; x <= m_max; ++x) {
      for (Amount k = -1; k < rt_stride_ - 1; ++k) {
        row_tail_[static_cast<std::size_t>(x * rt_stride_ + k + 1)] = d.row_tail(x, k);
      }
    }
    for (Amount n = 0; n <= m_max; ++n) {
      double s = 0.0;
      for (Amount x = 1; x <= n; ++x) s += row_tail(x, n - x);
      xi_tail_[static_cast<std::size_t>(n)] = s;
    }
    // sum_{x=1}^{N} row_tail(x, N - x + c_j) for every level
    for (Amount c : scale.levels()) {
      std::vector<double> v(m1, 0.0);
      for (Amount n = 0; n <= m_max; ++n) {
        double s = 0.0;
        for (Amount x = 1; x <= n; ++x) s += row_tail(x, n - x + c);
        v[static_cast<std::size_t>(n)] = s;
      }
      tail_beyond_premium_.push_back(std::move(v));
    }
    small_ = small;
    small_y_rows_.resize(static_cast<std::size_t>(small + 1) * m1);
    small_x_rows_.resize(static_cast<std::size_t>(small + 1) * m1);
    for (Amount a = 0; a <= small; ++a) {
      for (Amount b = 0; b <= m_max; ++b) {
        const auto k = static_cast<std::size_t>(a) * m1 + static_cast<std::size_t>(b);
        small_y_rows_[k] = d.pmf(b, a);
        small_x_rows_[k] = d.pmf(a, b);
      }
    }
  }

  Amount m_max() const { return m_max_; }
  double f00() const { return f00_; }
  double fx0(Amount x) const { return fx0_[static_cast<std::size_t>(x)]; }
  double tail_x(Amount n) const { return tail_x_[static_cast<std::size_t>(n)]; }
  double xi_tail(Amount n) const { return xi_tail_[static_cast<std::size_t>(n)]; }
  /// sum_{x=1}^{k} f(x, m - x), 0 <= k <= m
  double anti(Amount m, Amount k) const {
    return anti_[offset(m) + static_cast<std::size_t>(k)];
  }
  /// xi_y(n)
  double xi(Amount y, Amount n) const { return anti(n + y, n); }
  /// sum_{x+y=s} f(x, y)
  double diag(Amount s) const { return anti(s, s) + (s == 0 ? f00_ : 0.0); }
  /// sum_{x>=1, y>=1, x+y=s} f(x, y)
  double diag_both(Amount s) const { return s >= 2 ? anti(s, s - 1) : 0.0; }
  /// sum_{y>k} f(x, y)
  double row_tail(Amount x, Amount k) const {
    return row_tail_[static_cast<std::size_t>(x * rt_stride_ + k + 1)];
  }
  /// sum_{x=1}^{n} sum_{y > n - x + c_j} f(x, y), level j 0-based
  double tail_beyond_premium(int j, Amount n) const {
    return tail_beyond_premium_[static_cast<std::size_t>(j)][static_cast<std::size_t>(n)];
  }
  /// f(x, y) for min(x, y) <= the `small` bound given at construction
  double pmf(Amount x, Amount y) const {
    const auto m1 = static_cast<std::size_t>(m_max_ + 1);
    if (y <= small_) return small_y_rows_[static_cast<std::size_t>(y) * m1 + static_cast<std::size_t>(x)];
    return small_x_rows_[static_cast<std::size_t>(x) * m1 + static_cast<std::size_t>(y)];
  }

 private:
  static std::size_t offset(Amount m) {
    return static_cast<std::size_t>(m) * static_cast<std::size_t>(m + 1) / 2;
  }

  Amount m_max_;
  double f00_ = 0.0;
  std::vector<double> fx0_;
  std::vector<double> tail_x_;
  std::vector<double> xi_tail_;
  std::vector<double> anti_;
  std::vector<double> row_tail_;
  Amount rt_stride_ = 0;
  std::vector<std::vector<double>> tail_beyond_premium_;
  Amount small_ = 0;
  std::vector<double> small_y_rows_;
  std::vector<double> small_x_rows_;
};

class Solver {
 public:
  Solver(const RuinQuery& query, const SolverOptions& options)
      : query_(query), options_(options), rule_(query.rules), q_(query.q) {
    for (Amount c : query.scale.levels()) premium_.push_back(c);
    c_max_ = query.scale.max_premium();
    levels_ = query.scale.size();
    saturation_ = rule_.saturation();
    z_cap_ = std::max<Amount>(saturation_, 1);
  }

  RuinResult run() {
    const auto t0 = std::chrono::steady_clock::now();
    query_.validate();
    RuinResult result;
    result.metadata = {query_.principle, query_.q, query_.u0, query_.i0, query_.horizon, 0.0};
    const int h = query_.horizon;
    if (query_.u0 < 0 || h == 0) {
      result.value = query_.u0 < 0 ? 1.0 : 0.0;
      if (query_.u0 >= 0) {
        result.surplus_profile.assign(static_cast<std::size_t>(levels_),
                                      std::vector<double>(static_cast<std::size_t>(query_.u0 + 1), 0.0));
      }
      if (options_.keep_layers) {
        result.layers = std::vector<DPLayer>{
            DPLayer(0, query_.principle, query_.scale, std::max<Amount>(query_.u0, 0), z_cap_)};
      }
      finish(result, t0);
      return result;
    }

    const Amount top = query_.u0 + static_cast<Amount>(h) * c_max_;
    const Amount small = query_.principle == Principle::AggregateSettled ? z_cap_ : 0;
    grid_.emplace(query_.dist, query_.scale, top + 2 * c_max_ + z_cap_ + 2, small);

    std::vector<DPLayer> kept;
    DPLayer prev(0, query_.principle, query_.scale, top, z_cap_);
    if (options_.keep_layers) kept.push_back(prev);
    for (int n = 1; n <= h; ++n) {
      const Amount reach = query_.u0 + static_cast<Amount>(h - n) * c_max_;
      DPLayer cur(n, query_.principle, query_.scale, reach, z_cap_);
      fill_layer(prev, cur);
      if (options_.keep_layers) kept.push_back(cur);
      prev = std::move(cur);
    }
    result.value = prev.psi(query_.i0, query_.u0);
    result.surplus_profile.resize(static_cast<std::size_t>(levels_));
    for (int i = 0; i < levels_; ++i) {
      for (Amount u = 0; u <= query_.u0; ++u) {
        result.surplus_profile[static_cast<std::size_t>(i)].push_back(prev.psi_at(i, u));
      }
    }
    if (options_.keep_layers) result.layers = std::move(kept);
    finish(result, t0);
    return result;
  }

 private:
  static void finish(RuinResult& r, std::chrono::steady_clock::time_point t0) {
    r.metadata.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  void fill_layer(const DPLayer& prev, DPLayer& cur) const {
    const Amount reach = cur.u_max();
    const bool base = cur.horizon() == 1;
    switch (query_.principle) {
      case Principle::AggregateReported:
      case Principle::ReportedCount: {
        const bool count = query_.principle == Principle::ReportedCount;
        detail::parallel_for(0, static_cast<Amount>(levels_) * (reach + 1), options_.workers,
                             [&](Amount k) {
                               const int i = static_cast<int>(k / (reach + 1));
                               const Amount u = k % (reach + 1);
                               const Amount funds = u + premium_[static_cast<std::size_t>(i)];
                               cur.psi_at(i, u) = base    ? base_cell(funds)
                                                  : count ? reported_count_cell(prev, i, funds)
                                                          : reported_aggregate_cell(prev, i, funds);
                             });
        for (int i = 0; i < levels_; ++i) {
          for (Amount z = 1; z <= c_max_; ++z) {
            const Amount funds = premium_[static_cast<std::size_t>(i)] - z;
            cur.prime_reported(i, z) = base    ? base_cell(funds)
                                       : count ? reported_count_cell(prev, i, funds)
                                               : reported_aggregate_cell(prev, i, funds);
          }
        }
        break;
      }
      case Principle::AggregateSettled: {
        detail::parallel_for(0, static_cast<Amount>(levels_) * (reach + 1), options_.workers,
                             [&](Amount k) {
                               const int i = static_cast<int>(k / (reach + 1));
                               const Amount u = k % (reach + 1);
                               const Amount funds = u + premium_[static_cast<std::size_t>(i)];
                               cur.psi_at(i, u) =
                                   base ? base_cell(funds) : settled_aggregate_cell(prev, i, funds, 0);
                             });
        const Amount width = reach + c_max_;  // w in [-c_max, reach - 1]
        detail::parallel_for(
            0, static_cast<Amount>(levels_) * z_cap_ * width, options_.workers, [&](Amount k) {
              const int i = static_cast<int>(k / (z_cap_ * width));
              const Amount z = (k / width) % z_cap_ + 1;
              const Amount w = k % width - c_max_;
              const Amount funds = w + premium_[static_cast<std::size_t>(i)];
              cur.prime_settled_aggregate(i, w, z) =
                  base ? base_cell(funds) : settled_aggregate_cell(prev, i, funds, z);
            });
        break;
      }
      case Principle::SettledCount: {
        detail::parallel_for(0, static_cast<Amount>(levels_) * (reach + 1), options_.workers,
                             [&](Amount k) {
                               const int i = static_cast<int>(k / (reach + 1));
                               const Amount u = k % (reach + 1);
                               const Amount funds = u + premium_[static_cast<std::size_t>(i)];
                               cur.psi_at(i, u) =
                                   base ? base_cell(funds) : settled_count_cell(prev, i, funds, 0);
                             });
        const Amount width = reach + c_max_;
        detail::parallel_for(0, static_cast<Amount>(levels_) * width, options_.workers,
                             [&](Amount k) {
                               const int i = static_cast<int>(k / width);
                               const Amount w = k % width - c_max_;
                               const Amount funds = w + premium_[static_cast<std::size_t>(i)];
                               cur.prime_settled_count(i, w) =
                                   base ? base_cell(funds) : settled_count_cell(prev, i, funds, 1);
                             });
        break;
      }
    }
  }

  // One period left: ruin iff X > N, or the by-claim is paid at once and
  // X + Y > N.
  double base_cell(Amount funds) const {
    if (funds < 0) return 1.0;
    return (1.0 - q_) * grid_->xi_tail(funds) + grid_->tail_x(funds);
  }

  // Ruin in the current period plus the (1-q) immediate by-claim overflow.
  double immediate_ruin(Amount funds) const {
    return (1.0 - q_) * grid_->xi_tail(funds) + grid_->tail_x(funds);
  }

  double reported_aggregate_cell(const DPLayer& prev, int i, Amount funds) const {
    if (funds < 0) return 1.0;
    const auto& g = *grid_;
    double settled = 0.0;
    for (Amount s = 0; s <= funds; ++s) {
      settled += g.diag(s) * prev.psi_at(rule_(i, s), funds - s);
    }
    // Delayed by-claim y that overshoots the remaining funds: the next
    // period starts at surplus 0 with an up-front claim y.
    double delayed = 0.0;
    double listed = 0.0;
    for (Amount y = 1; y <= c_max_; ++y) {
      const double w = g.xi(y, funds);
      const int j = rule_(i, funds + y);
      delayed += w * (y <= premium_[static_cast<std::size_t>(j)] ? prev.prime_reported(j, y) : 1.0);
      listed += w;
    }
    delayed += g.xi_tail(funds) - listed;
    return settled + q_ * delayed + immediate_ruin(funds);
  }

  double reported_count_cell(const DPLayer& prev, int i, Amount funds) const {
    if (funds < 0) return 1.0;
    const auto& g = *grid_;
    double v = g.f00() * prev.psi_at(rule_(i, 0), funds);
    const int j1 = rule_(i, 1);
    for (Amount x = 1; x <= funds; ++x) v += g.fx0(x) * prev.psi_at(j1, funds - x);
    const int j2 = rule_(i, 2);
    double both = 0.0;
    for (Amount s = 2; s <= funds; ++s) both += g.diag_both(s) * prev.psi_at(j2, funds - s);
    double delayed = 0.0;
    double listed = 0.0;
    const Amount c2 = premium_[static_cast<std::size_t>(j2)];
    for (Amount y = 1; y <= c2; ++y) {
      const double w = g.xi(y, funds);
      delayed += w * prev.prime_reported(j2, y);
      listed += w;
    }
    delayed += g.xi_tail(funds) - listed;
    return v + both + q_ * delayed + immediate_ruin(funds);
  }

  // `offset` is the pending by-claim (capped at the rule saturation) that is
  // settled this period, 0 when there is none.
  double settled_aggregate_cell(const DPLayer& prev, int i, Amount funds, Amount offset) const {
    if (funds < 0) return 1.0;
    const auto& g = *grid_;
    double v = 0.0;
    for (Amount x = 0; x <= funds; ++x) {
      v += g.fx0(x) * prev.psi_at(rule_(i, x + offset), funds - x);
    }
    double paid = 0.0;
    for (Amount s = 2; s <= funds; ++s) {
      paid += g.diag_both(s) * prev.psi_at(rule_(i, s + offset), funds - s);
    }
    v += (1.0 - q_) * paid;

    // Delayed by-claim: trigger is x + offset, next state psi'_j(funds - x; y).
    auto prime = [&](int j, Amount w, Amount y) {
      return w < -premium_[static_cast<std::size_t>(j)]
                 ? 1.0
                 : prev.prime_settled_aggregate(j, w, std::min(y, z_cap_));
    };
    double delayed = 0.0;
    const Amount x_sat = std::max<Amount>(1, saturation_ - offset);
    // x below saturation: destination varies with x
    for (Amount x = 1; x <= std::min(funds, x_sat - 1); ++x) {
      const int j = rule_(i, x + offset);
      const Amount last = funds - x + premium_[static_cast<std::size_t>(j)];
      for (Amount y = 1; y <= last; ++y) {
        delayed += g.pmf(x, y) * prime(j, funds - x - y, y);
      }
      delayed += g.row_tail(x, last);
    }
    if (funds >= x_sat) {
      const int j = rule_(i, x_sat + offset);
      const Amount c = premium_[static_cast<std::size_t>(j)];
      // y below the z cap read distinct psi' columns
      for (Amount x = x_sat; x <= funds; ++x) {
        const Amount last = std::min(z_cap_ - 1, funds - x + c);
        for (Amount y = 1; y <= last; ++y) {
          delayed += g.pmf(x, y) * prime(j, funds - x - y, y);
        }
      }
      // y >= z cap share the saturated column; group by m = x + y
      for (Amount m = x_sat + z_cap_; m <= funds + c; ++m) {
        const Amount hi = std::min(funds, m - z_cap_);
        if (hi < x_sat) continue;
        const double mass = g.anti(m, hi) - g.anti(m, x_sat - 1);
        delayed += mass * prev.prime_settled_aggregate(j, funds - m, z_cap_);
      }
      double beyond = g.tail_beyond_premium(j, funds);
      for (Amount x = 1; x <= std::min(funds, x_sat - 1); ++x) {
        beyond -= g.row_tail(x, funds - x + c);
      }
      delayed += beyond;
    }
    return v + q_ * delayed + immediate_ruin(funds);
  }

  // `pending` is 1 when a delayed by-claim is settled this period.
  double settled_count_cell(const DPLayer& prev, int i, Amount funds, Amount pending) const {
    if (funds < 0) return 1.0;
    const auto& g = *grid_;
    double v = g.f00() * prev.psi_at(rule_(i, pending), funds);
    const int j1 = rule_(i, 1 + pending);
    for (Amount x = 1; x <= funds; ++x) v += g.fx0(x) * prev.psi_at(j1, funds - x);
    const int j2 = rule_(i, 2 + pending);
    double paid = 0.0;
    for (Amount s = 2; s <= funds; ++s) paid += g.diag_both(s) * prev.psi_at(j2, funds - s);
    v += (1.0 - q_) * paid;
    // delayed: the main claim (and the pending one) are the settled count
    const int jd = j1;
    const Amount c = premium_[static_cast<std::size_t>(jd)];
    double delayed = 0.0;
    for (Amount m = 2; m <= funds + c; ++m) {
      delayed += g.anti(m, std::min(funds, m - 1)) * prev.prime_settled_count(jd, funds - m);
    }
    delayed += g.tail_beyond_premium(jd, funds);
    return v + q_ * delayed + immediate_ruin(funds);
  }

  RuinQuery query_;
  SolverOptions options_;
  RuleLookup rule_;
  double q_;
  std::vector<Amount> premium_;
  Amount c_max_ = 0;
  int levels_ = 0;
  Amount saturation_ = 0;
  Amount z_cap_ = 1;
  std::optional<ClaimGrid> grid_;
};

inline void require_principle(const RuinQuery& q, Principle p) {
  if (q.principle != p) {
    throw std::invalid_argument("solver for " + std::string(to_string(p)) +
                                " called with a " + std::string(to_string(q.principle)) +
                                " query");
  }
}

}  // namespace detail

inline RuinResult solve_reported_aggregate(const RuinQuery& q, const SolverOptions& o = {}) {
  detail::require_principle(q, Principle::AggregateReported);
  return detail::Solver(q, o).run();
}

inline RuinResult solve_settled_aggregate(const RuinQuery& q, const SolverOptions& o = {}) {
  detail::require_principle(q, Principle::AggregateSettled);
  return detail::Solver(q, o).run();
}

inline RuinResult solve_reported_count(const RuinQuery& q, const SolverOptions& o = {}) {
  detail::require_principle(q, Principle::ReportedCount);
  return detail::Solver(q, o).run();
}

inline RuinResult solve_settled_count(const RuinQuery& q, const SolverOptions& o = {}) {
  detail::require_principle(q, Principle::SettledCount);
  return detail::Solver(q, o).run();
}

inline RuinResult ruin_probability(const RuinQuery& q, const SolverOptions& o = {}) {
  q.validate();
  switch (q.principle) {
    case Principle::AggregateReported: return solve_reported_aggregate(q, o);
    case Principle::AggregateSettled: return solve_settled_aggregate(q, o);
    case Principle::ReportedCount: return solve_reported_count(q, o);
    case Principle::SettledCount: return solve_settled_count(q, o);
  }
  throw std::logic_error("unhandled principle");
}

}  // namespace ruinlab
