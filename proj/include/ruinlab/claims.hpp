#pragma once

// Joint main-claim / by-claim distributions on the non-negative integers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ruinlab {

using Amount = std::int64_t;

inline constexpr double kDefaultTruncationEpsilon = 1e-12;

struct TableEntry {
  Amount x = 0;
  Amount y = 0;
  double p = 0.0;
};

struct ClaimStatistics {
  double mean_x = 0.0;
  double mean_y = 0.0;
  // Empty when one of the variances is zero.
  std::optional<double> corr_xy;
  std::optional<double> corr_counts;
};

namespace detail {

inline void require_non_negative(Amount v, const char* what) {
  if (v < 0) {
    throw std::domain_error(std::string(what) + " must be non-negative, got " +
                            std::to_string(v));
  }
}

inline std::optional<double> pearson(double exy, double ex, double ey,
                                     double exx, double eyy) {
  const double vx = exx - ex * ex;
  const double vy = eyy - ey * ey;
  if (!(vx > 1e-300) || !(vy > 1e-300)) return std::nullopt;
  return (exy - ex * ey) / std::sqrt(vx * vy);
}

}  // namespace detail

/// Joint p.m.f. f(x, y) of a main claim X and its by-claim Y.
///
/// Three families are supported: the analytic geometric families (perfectly
/// correlated "diagonal" and independent-by-claim), finite tables, and
/// two-component mixtures of any of these. Every family satisfies
/// f(0, y) = 0 for y >= 1. Objects are immutable after construction and
/// safe to share between threads.
class JointClaimPMF {
 public:
  enum class SupportKind { AnalyticGeometric, FiniteTable, Mixture };

  /// f(0,0) = p, f(x,x) = p(1-p)^x for x >= 1, zero elsewhere.
  static JointClaimPMF geometric_h(double p = 1.0 / 6.0,
                                   double epsilon = kDefaultTruncationEpsilon) {
    check_parameter(p, "geometric_h: p");
    return JointClaimPMF(Diagonal{p}, epsilon);
  }

  /// f(0,0) = p, f(x,y) = p(1-p)^x r(1-r)^y for x >= 1, y >= 0.
  static JointClaimPMF geometric_l(double p = 1.0 / 6.0, double r = 1.0 / 7.0,
                                   double epsilon = kDefaultTruncationEpsilon) {
    check_parameter(p, "geometric_l: p");
    check_parameter(r, "geometric_l: r");
    return JointClaimPMF(Independent{p, r}, epsilon);
  }

  /// weight * left + (1 - weight) * right.
  static JointClaimPMF mixture(double weight, JointClaimPMF left,
                               JointClaimPMF right,
                               std::optional<double> epsilon = std::nullopt) {
    if (!(weight >= 0.0 && weight <= 1.0)) {
      throw std::invalid_argument("mixture weight must lie in [0,1]");
    }
    const double eps = epsilon.value_or(
        std::min(left.truncation_epsilon(), right.truncation_epsilon()));
    return JointClaimPMF(
        Mix{weight, std::make_shared<const JointClaimPMF>(std::move(left)),
            std::make_shared<const JointClaimPMF>(std::move(right))},
        eps);
  }

  /// Finite table of (x, y, p) rows. Rejects duplicates, negative
  /// probabilities, mass on (0, y>0) and tables that do not sum to one.
  static JointClaimPMF table(const std::vector<TableEntry>& rows,
                             double epsilon = kDefaultTruncationEpsilon) {
    if (rows.empty()) throw std::invalid_argument("claim table is empty");
    Table t;
    std::map<std::pair<Amount, Amount>, double> seen;
    double total = 0.0;
    for (const auto& r : rows) {
      if (r.x < 0 || r.y < 0) {
        throw std::invalid_argument("claim table: negative claim amount");
      }
      if (!(r.p >= 0.0 && r.p <= 1.0)) {
        throw std::invalid_argument("claim table: probability outside [0,1]");
      }
      if (r.x == 0 && r.y != 0 && r.p > 0.0) {
        throw std::invalid_argument(
            "claim table: a by-claim cannot occur without a main claim "
            "(f(0,y) must be 0 for y>0)");
      }
      if (!seen.emplace(std::make_pair(r.x, r.y), r.p).second) {
        throw std::invalid_argument("claim table: duplicate row (" +
                                    std::to_string(r.x) + "," +
                                    std::to_string(r.y) + ")");
      }
      total += r.p;
      t.max_x = std::max(t.max_x, r.x);
      t.max_y = std::max(t.max_y, r.y);
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw std::invalid_argument("claim table: probabilities sum to " +
                                  std::to_string(total) + ", expected 1");
    }
    t.dense.assign(static_cast<std::size_t>((t.max_x + 1) * (t.max_y + 1)), 0.0);
    for (const auto& [key, p] : seen) {
      t.dense[static_cast<std::size_t>(key.first * (t.max_y + 1) + key.second)] = p;
      if (p > 0.0) t.entries.push_back({key.first, key.second, p});
    }
    // row_suffix[x*(max_y+2) + k] = sum_{y >= k} f(x, y)
    const Amount stride = t.max_y + 2;
    t.row_suffix.assign(static_cast<std::size_t>((t.max_x + 1) * stride), 0.0);
    t.x_marginal.assign(static_cast<std::size_t>(t.max_x + 1), 0.0);
    t.y_marginal.assign(static_cast<std::size_t>(t.max_y + 1), 0.0);
    for (Amount x = 0; x <= t.max_x; ++x) {
      for (Amount y = t.max_y; y >= 0; --y) {
        const double p = t.dense[static_cast<std::size_t>(x * (t.max_y + 1) + y)];
        t.row_suffix[static_cast<std::size_t>(x * stride + y)] =
            t.row_suffix[static_cast<std::size_t>(x * stride + y + 1)] + p;
        t.y_marginal[static_cast<std::size_t>(y)] += p;
      }
      t.x_marginal[static_cast<std::size_t>(x)] =
          t.row_suffix[static_cast<std::size_t>(x * stride)];
    }
    return JointClaimPMF(std::move(t), epsilon);
  }

  SupportKind support_kind() const {
    return std::visit(
        [](const auto& m) -> SupportKind {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Table>) return SupportKind::FiniteTable;
          if constexpr (std::is_same_v<M, Mix>) return SupportKind::Mixture;
          return SupportKind::AnalyticGeometric;
        },
        model_);
  }

  double truncation_epsilon() const { return epsilon_; }
  Amount x_cutoff() const { return x_cutoff_; }
  Amount y_cutoff() const { return y_cutoff_; }

  double pmf(Amount x, Amount y) const {
    detail::require_non_negative(x, "x");
    detail::require_non_negative(y, "y");
    return raw_pmf(x, y);
  }

  double marginal_x(Amount x) const {
    detail::require_non_negative(x, "x");
    return std::visit(
        [&](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Diagonal> || std::is_same_v<M, Independent>) {
            return m.p * std::pow(1.0 - m.p, static_cast<double>(x));
          } else if constexpr (std::is_same_v<M, Table>) {
            return x <= m.max_x ? m.x_marginal[static_cast<std::size_t>(x)] : 0.0;
          } else {
            return m.w * m.left->marginal_x(x) + (1.0 - m.w) * m.right->marginal_x(x);
          }
        },
        model_);
  }

  double marginal_y(Amount y) const {
    detail::require_non_negative(y, "y");
    return std::visit(
        [&](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Diagonal>) {
            return m.p * std::pow(1.0 - m.p, static_cast<double>(y));
          } else if constexpr (std::is_same_v<M, Independent>) {
            return (y == 0 ? m.p : 0.0) +
                   (1.0 - m.p) * m.r * std::pow(1.0 - m.r, static_cast<double>(y));
          } else if constexpr (std::is_same_v<M, Table>) {
            return y <= m.max_y ? m.y_marginal[static_cast<std::size_t>(y)] : 0.0;
          } else {
            return m.w * m.left->marginal_y(y) + (1.0 - m.w) * m.right->marginal_y(y);
          }
        },
        model_);
  }

  /// P(X > n), n >= -1.
  double tail_x(Amount n) const {
    if (n < -1) throw std::domain_error("tail_x: n must be >= -1");
    if (n == -1) return 1.0;
    return std::visit(
        [&](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Diagonal> || std::is_same_v<M, Independent>) {
            return std::pow(1.0 - m.p, static_cast<double>(n + 1));
          } else if constexpr (std::is_same_v<M, Table>) {
            double s = 0.0;
            for (Amount x = n + 1; x <= m.max_x; ++x) s += m.x_marginal[static_cast<std::size_t>(x)];
            return s;
          } else {
            return m.w * m.left->tail_x(n) + (1.0 - m.w) * m.right->tail_x(n);
          }
        },
        model_);
  }

  /// P(Y > n), n >= -1.
  double tail_y(Amount n) const {
    if (n < -1) throw std::domain_error("tail_y: n must be >= -1");
    if (n == -1) return 1.0;
    return std::visit(
        [&](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Diagonal>) {
            return std::pow(1.0 - m.p, static_cast<double>(n + 1));
          } else if constexpr (std::is_same_v<M, Independent>) {
            return (1.0 - m.p) * std::pow(1.0 - m.r, static_cast<double>(n + 1));
          } else if constexpr (std::is_same_v<M, Table>) {
            double s = 0.0;
            for (Amount y = n + 1; y <= m.max_y; ++y) s += m.y_marginal[static_cast<std::size_t>(y)];
            return s;
          } else {
            return m.w * m.left->tail_y(n) + (1.0 - m.w) * m.right->tail_y(n);
          }
        },
        model_);
  }

  /// sum_{y > k} f(x, y), for x >= 0 and k >= -1.
  double row_tail(Amount x, Amount k) const {
    detail::require_non_negative(x, "x");
    if (k < -1) throw std::domain_error("row_tail: k must be >= -1");
    return std::visit(
        [&](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Diagonal>) {
            return x > k ? m.p * std::pow(1.0 - m.p, static_cast<double>(x)) : 0.0;
          } else if constexpr (std::is_same_v<M, Independent>) {
            if (x == 0) return k < 0 ? m.p : 0.0;
            return m.p * std::pow(1.0 - m.p, static_cast<double>(x)) *
                   std::pow(1.0 - m.r, static_cast<double>(k + 1));
          } else if constexpr (std::is_same_v<M, Table>) {
            if (x > m.max_x || k + 1 > m.max_y) return 0.0;
            return m.row_suffix[static_cast<std::size_t>(x * (m.max_y + 2) + k + 1)];
          } else {
            return m.w * m.left->row_tail(x, k) + (1.0 - m.w) * m.right->row_tail(x, k);
          }
        },
        model_);
  }

  /// xi_y(n) = sum_{x=1}^{n} f(x, y + n - x).
  double xi(Amount y, Amount n) const {
    detail::require_non_negative(y, "y");
    detail::require_non_negative(n, "n");
    double s = 0.0;
    for (Amount x = 1; x <= n; ++x) s += raw_pmf(x, y + n - x);
    return s;
  }

  /// sum_{y >= 1} xi_y(n), evaluated through the finite identity
  /// sum_{x=1}^{n} [f_X(x) - sum_{y=0}^{n-x} f(x, y)]. No truncation.
  double xi_tail_sum(Amount n) const {
    detail::require_non_negative(n, "n");
    double s = 0.0;
    for (Amount x = 1; x <= n; ++x) s += row_tail(x, n - x);
    return s;
  }

  ClaimStatistics statistics() const {
    double ex = 0, ey = 0, exx = 0, eyy = 0, exy = 0;
    for_each_in_box([&](Amount x, Amount y, double p) {
      const auto dx = static_cast<double>(x);
      const auto dy = static_cast<double>(y);
      ex += p * dx;
      ey += p * dy;
      exx += p * dx * dx;
      eyy += p * dy * dy;
      exy += p * dx * dy;
    });
    ClaimStatistics st;
    st.mean_x = ex;
    st.mean_y = ey;
    st.corr_xy = detail::pearson(exy, ex, ey, exx, eyy);
    // N^X = 1{X>0}, N^Y = 1{Y>0}
    const double px = 1.0 - marginal_x(0);
    const double py = 1.0 - marginal_y(0);
    const double pxy = 1.0 - marginal_x(0) - marginal_y(0) + raw_pmf(0, 0);
    st.corr_counts = detail::pearson(pxy, px, py, px, py);
    return st;
  }

  /// Calls fn(x, y, p) for every non-zero cell with x <= x_cutoff and
  /// y <= y_cutoff.
  template <typename Fn>
  void for_each_in_box(Fn&& fn) const {
    if (const auto* t = std::get_if<Table>(&model_)) {
      for (const auto& e : t->entries) fn(e.x, e.y, e.p);
      return;
    }
    for (Amount x = 0; x <= x_cutoff_; ++x) {
      for (Amount y = 0; y <= y_cutoff_; ++y) {
        const double p = raw_pmf(x, y);
        if (p > 0.0) fn(x, y, p);
      }
    }
  }

  /// Non-zero support when finite, otherwise empty.
  std::vector<TableEntry> finite_support() const {
    if (const auto* t = std::get_if<Table>(&model_)) return t->entries;
    if (const auto* m = std::get_if<Mix>(&model_)) {
      auto l = m->left->finite_support();
      auto r = m->right->finite_support();
      if (l.empty() || r.empty()) return {};
      std::map<std::pair<Amount, Amount>, double> acc;
      for (const auto& e : l) acc[{e.x, e.y}] += m->w * e.p;
      for (const auto& e : r) acc[{e.x, e.y}] += (1.0 - m->w) * e.p;
      std::vector<TableEntry> out;
      for (const auto& [k, p] : acc) {
        if (p > 0.0) out.push_back({k.first, k.second, p});
      }
      return out;
    }
    return {};
  }

  bool has_finite_support() const { return !finite_support().empty(); }

 private:
  struct Diagonal {
    double p;
  };
  struct Independent {
    double p;
    double r;
  };
  struct Table {
    Amount max_x = 0;
    Amount max_y = 0;
    std::vector<double> dense;
    std::vector<double> row_suffix;
    std::vector<double> x_marginal;
    std::vector<double> y_marginal;
    std::vector<TableEntry> entries;
  };
  struct Mix {
    double w;
    std::shared_ptr<const JointClaimPMF> left;
    std::shared_ptr<const JointClaimPMF> right;
  };
  using Model = std::variant<Diagonal, Independent, Table, Mix>;

  JointClaimPMF(Model model, double epsilon) : model_(std::move(model)), epsilon_(epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
      throw std::invalid_argument("truncation_epsilon must lie in (0,1)");
    }
    x_cutoff_ = find_cutoff([this](Amount n) { return tail_x(n); });
    y_cutoff_ = find_cutoff([this](Amount n) { return tail_y(n); });
  }

  static void check_parameter(double p, const char* what) {
    if (!(p > 0.0 && p < 1.0)) {
      throw std::invalid_argument(std::string(what) + " must lie in (0,1)");
    }
  }

  template <typename Tail>
  Amount find_cutoff(Tail&& tail) const {
    Amount n = 0;
    while (tail(n) >= epsilon_) {
      if (++n > 100'000'000) throw std::runtime_error("cutoff search diverged");
    }
    return n;
  }

  double raw_pmf(Amount x, Amount y) const {
    return std::visit(
        [&](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Diagonal>) {
            return x == y ? m.p * std::pow(1.0 - m.p, static_cast<double>(x)) : 0.0;
          } else if constexpr (std::is_same_v<M, Independent>) {
            if (x == 0) return y == 0 ? m.p : 0.0;
            return m.p * std::pow(1.0 - m.p, static_cast<double>(x)) * m.r *
                   std::pow(1.0 - m.r, static_cast<double>(y));
          } else if constexpr (std::is_same_v<M, Table>) {
            if (x > m.max_x || y > m.max_y) return 0.0;
            return m.dense[static_cast<std::size_t>(x * (m.max_y + 1) + y)];
          } else {
            return m.w * m.left->raw_pmf(x, y) + (1.0 - m.w) * m.right->raw_pmf(x, y);
          }
        },
        model_);
  }

  Model model_;
  double epsilon_;
  Amount x_cutoff_ = 0;
  Amount y_cutoff_ = 0;
};

}  // namespace ruinlab
