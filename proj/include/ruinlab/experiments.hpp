#pragma once

// The numerical study: six correlation/delay scenarios, the four ruin
// tables, the premium-level chains and the curve data behind the figures,
// each compared against a fixture of published values.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ruinlab/bonus_malus.hpp"
#include "ruinlab/claims.hpp"
#include "ruinlab/ruin_engine.hpp"

#ifndef RUINLAB_DATA_DIR
#define RUINLAB_DATA_DIR "data"
#endif

namespace ruinlab {

inline std::string format_number(double v, bool full_precision = false) {
  char buf[40];
  std::snprintf(buf, sizeof buf, full_precision ? "%.17g" : "%.6g", v);
  return buf;
}

struct Scenario {
  std::string label;  // H1, H2, M1, M2, L1, L2
  char family = 'H';
  double q = 0.0;
};

class ScenarioCatalog {
 public:
  ScenarioCatalog()
      : scale_(std::vector<Amount>{11, 12, 14, 16, 18}),
        aggregate_rules_(RuleSet::threshold(3, 14, 5)),
        count_rules_(RuleSet::threshold(0, 1, 5)),
        h_(JointClaimPMF::geometric_h()),
        l_(JointClaimPMF::geometric_l()),
        m_(JointClaimPMF::mixture(0.5, h_, l_)) {
    for (char f : {'H', 'M', 'L'}) {
      scenarios_.push_back({std::string(1, f) + "1", f, 0.2});
      scenarios_.push_back({std::string(1, f) + "2", f, 0.8});
    }
    for (Amount u = 0; u <= 100; u += 10) u_grid_.push_back(u);
  }

  static const ScenarioCatalog& standard() {
    static const ScenarioCatalog c;
    return c;
  }

  const std::vector<Scenario>& scenarios() const { return scenarios_; }
  const Scenario& scenario(std::string_view label) const {
    for (const auto& s : scenarios_) {
      if (s.label == label) return s;
    }
    throw std::invalid_argument("unknown scenario '" + std::string(label) + "'");
  }
  const PremiumScale& scale() const { return scale_; }
  LevelIndex initial_level() const { return 3; }
  int horizon() const { return 20; }
  const std::vector<Amount>& u_grid() const { return u_grid_; }

  const JointClaimPMF& distribution(char family) const {
    switch (family) {
      case 'H': return h_;
      case 'M': return m_;
      case 'L': return l_;
    }
    throw std::invalid_argument(std::string("unknown distribution family '") + family + "'");
  }

  const RuleSet& rules_for(Principle p) const {
    return is_count_principle(p) ? count_rules_ : aggregate_rules_;
  }

  RuinQuery query(Principle p, const Scenario& s, Amount u0) const {
    RuinQuery r;
    r.principle = p;
    r.dist = distribution(s.family);
    r.q = s.q;
    r.scale = scale_;
    r.rules = rules_for(p);
    r.u0 = u0;
    r.i0 = initial_level();
    r.horizon = horizon();
    return r;
  }

 private:
  PremiumScale scale_;
  RuleSet aggregate_rules_;
  RuleSet count_rules_;
  JointClaimPMF h_, l_, m_;
  std::vector<Scenario> scenarios_;
  std::vector<Amount> u_grid_;
};

/// Table k in 1..4 corresponds to the four principles in declaration order.
inline Principle table_principle(int k) {
  if (k < 1 || k > 4) throw std::invalid_argument("table must be 1..4, got " + std::to_string(k));
  return kAllPrinciples[k - 1];
}

// ---- reference fixture ----

struct ReferenceValue {
  std::string kind, id, row, column;
  double value = 0.0;
  double tolerance = 0.0;
};

class ReferenceSet {
 public:
  static std::filesystem::path default_path() {
    return std::filesystem::path(RUINLAB_DATA_DIR) / "reference" / "published_values.csv";
  }

  static ReferenceSet load(const std::filesystem::path& path = default_path()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open reference fixture " + path.string());
    ReferenceSet s;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) f.push_back(cell);
      if (f.size() != 6) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                 ": expected 6 fields");
      }
      s.values_.push_back({f[0], f[1], f[2], f[3], std::stod(f[4]), std::stod(f[5])});
    }
    return s;
  }

  const ReferenceValue* find(std::string_view kind, std::string_view id, std::string_view row,
                             std::string_view column) const {
    for (const auto& v : values_) {
      if (v.kind == kind && v.id == id && v.row == row && v.column == column) return &v;
    }
    return nullptr;
  }

  const std::vector<ReferenceValue>& values() const { return values_; }

 private:
  std::vector<ReferenceValue> values_;
};

struct CellDiff {
  std::string where;
  double computed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  double deviation() const { return std::abs(computed - expected); }
  bool ok() const { return deviation() <= tolerance; }
};

struct DiffReport {
  std::string name;
  std::vector<CellDiff> cells;

  void add(const ReferenceSet& ref, std::string_view kind, std::string_view id,
           std::string_view row, std::string_view column, double computed) {
    const auto* r = ref.find(kind, id, row, column);
    if (!r) {
      throw std::runtime_error("fixture has no value for " + std::string(kind) + "," +
                               std::string(id) + "," + std::string(row) + "," +
                               std::string(column));
    }
    std::string where = std::string(kind) + " " + std::string(id);
    if (!row.empty()) where += " row " + std::string(row);
    if (!column.empty()) where += " col " + std::string(column);
    cells.push_back({where, computed, r->value, r->tolerance});
  }

  double max_abs_deviation() const {
    double m = 0.0;
    for (const auto& c : cells) m = std::max(m, c.deviation());
    return m;
  }
  std::size_t failures() const {
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [](const CellDiff& c) { return !c.ok(); }));
  }
  bool passed() const { return failures() == 0; }

  void render(std::ostream& os) const {
    os << name << ": " << cells.size() << " cells, max |dev| = " << format_number(max_abs_deviation())
       << ", beyond tolerance = " << failures() << "\n";
    for (const auto& c : cells) {
      if (c.ok()) continue;
      os << "  " << c.where << ": computed " << format_number(c.computed, true) << " expected "
         << format_number(c.expected, true) << " |dev| " << format_number(c.deviation())
         << " > " << format_number(c.tolerance) << "\n";
    }
  }
};

// ---- tables and figures ----

struct TableResult {
  int k = 0;
  Principle principle = Principle::AggregateReported;
  std::vector<std::string> columns;
  std::vector<Amount> u;
  std::vector<std::vector<double>> values;  // [u index][column index]
  DiffReport diff;
};

struct Series {
  std::string name;
  std::vector<std::pair<Amount, double>> points;
};

struct FigureData {
  int k = 0;
  std::string title;
  std::vector<Series> series;
};

struct MarkovResult {
  Principle principle = Principle::AggregateReported;
  char family = 'H';
  Matrix transition;
  Vector stationary;
  double expected_premium = 0.0;
};

struct MarkovReproduction {
  std::vector<MarkovResult> chains;
  DiffReport diff;
};

/// Runs the study and caches one psi_3(., 20) profile per
/// (principle, scenario): a single solve at u0 = 100 yields every u.
class Reproducer {
 public:
  explicit Reproducer(const ScenarioCatalog& catalog = ScenarioCatalog::standard(),
                      unsigned workers = 1)
      : catalog_(catalog), workers_(workers) {}

  const ScenarioCatalog& catalog() const { return catalog_; }

  const std::vector<double>& profile(Principle p, const std::string& label) {
    const auto key = std::make_pair(p, label);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const auto& s = catalog_.scenario(label);
    const Amount top = catalog_.u_grid().back();
    SolverOptions o;
    o.workers = workers_;
    auto r = ruin_probability(catalog_.query(p, s, top), o);
    return cache_[key] = std::move(r.surplus_profile[static_cast<std::size_t>(catalog_.initial_level() - 1)]);
  }

  double psi(Principle p, const std::string& label, Amount u) {
    return profile(p, label).at(static_cast<std::size_t>(u));
  }

  /// Smoke mode keeps u in {0, 50, 100} and scenarios H1, L2.
  TableResult table(int k, const ReferenceSet& ref, bool smoke = false) {
    TableResult t;
    t.k = k;
    t.principle = table_principle(k);
    if (smoke) {
      t.columns = {"H1", "L2"};
      t.u = {0, 50, 100};
    } else {
      for (const auto& s : catalog_.scenarios()) t.columns.push_back(s.label);
      t.u = catalog_.u_grid();
    }
    t.values.assign(t.u.size(), std::vector<double>(t.columns.size(), 0.0));
    t.diff.name = "table" + std::to_string(k);
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      for (std::size_t r = 0; r < t.u.size(); ++r) {
        t.values[r][c] = psi(t.principle, t.columns[c], t.u[r]);
      }
    }
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      for (std::size_t r = 0; r < t.u.size(); ++r) {
        t.diff.add(ref, "table", std::to_string(k), std::to_string(t.u[r]), t.columns[c],
                   t.values[r][c]);
      }
    }
    return t;
  }

  /// Figures 1, 2, 5, 6 are the four tables; 3/4 compare the aggregate
  /// principles at q = 0.2/0.8 and 7/8 do the same for the count ones.
  FigureData figure(int k) {
    FigureData f;
    f.k = k;
    auto add = [&](Principle p, const std::string& label) {
      Series s;
      s.name = std::string(to_string(p)) + ":" + label;
      for (Amount u : catalog_.u_grid()) s.points.emplace_back(u, psi(p, label, u));
      f.series.push_back(std::move(s));
    };
    auto whole_table = [&](Principle p) {
      f.title = "psi_3(u,20) under " + std::string(to_string(p));
      for (const auto& s : catalog_.scenarios()) add(p, s.label);
    };
    auto comparison = [&](Principle reported, Principle settled, char delay) {
      f.title = std::string(to_string(reported)) + " vs " + std::string(to_string(settled)) +
                (delay == '1' ? " at q=0.2" : " at q=0.8");
      for (char fam : {'H', 'M', 'L'}) {
        const std::string label{fam, delay};
        add(reported, label);
        add(settled, label);
      }
    };
    switch (k) {
      case 1: whole_table(Principle::AggregateReported); break;
      case 2: whole_table(Principle::AggregateSettled); break;
      case 3: comparison(Principle::AggregateReported, Principle::AggregateSettled, '1'); break;
      case 4: comparison(Principle::AggregateReported, Principle::AggregateSettled, '2'); break;
      case 5: whole_table(Principle::ReportedCount); break;
      case 6: whole_table(Principle::SettledCount); break;
      case 7: comparison(Principle::ReportedCount, Principle::SettledCount, '1'); break;
      case 8: comparison(Principle::ReportedCount, Principle::SettledCount, '2'); break;
      default: throw std::invalid_argument("figure must be 1..8, got " + std::to_string(k));
    }
    return f;
  }

 private:
  const ScenarioCatalog& catalog_;
  unsigned workers_;
  std::map<std::pair<Principle, std::string>, std::vector<double>> cache_;
};

inline std::string chain_id(Principle p, char family) {
  return std::string(to_string(p)) + "_" + family;
}

inline MarkovReproduction reproduce_markov(const ReferenceSet& ref,
                                           const ScenarioCatalog& catalog = ScenarioCatalog::standard()) {
  MarkovReproduction out;
  out.diff.name = "markov";
  for (Principle p : {Principle::AggregateReported, Principle::ReportedCount}) {
    for (char fam : {'H', 'M', 'L'}) {
      MarkovResult m;
      m.principle = p;
      m.family = fam;
      m.transition = transition_matrix(catalog.distribution(fam), catalog.rules_for(p), p);
      m.stationary = stationary_distribution(m.transition);
      m.expected_premium = expected_premium(m.stationary, catalog.scale());
      const auto id = chain_id(p, fam);
      for (Eigen::Index i = 0; i < m.transition.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.transition.cols(); ++j) {
          out.diff.add(ref, "matrix", id, std::to_string(i + 1), std::to_string(j + 1),
                       m.transition(i, j));
        }
      }
      for (Eigen::Index j = 0; j < m.stationary.size(); ++j) {
        out.diff.add(ref, "pi", id, "", std::to_string(j + 1), m.stationary(j));
      }
      out.diff.add(ref, "premium", id, "", "", m.expected_premium);
      out.chains.push_back(std::move(m));
    }
  }
  return out;
}

inline DiffReport reproduce_statistics(const ReferenceSet& ref,
                                       const ScenarioCatalog& catalog = ScenarioCatalog::standard()) {
  DiffReport d;
  d.name = "statistics";
  for (char fam : {'H', 'M', 'L'}) {
    const auto st = catalog.distribution(fam).statistics();
    const std::string id(1, fam);
    d.add(ref, "corr_xy", id, "", "", st.corr_xy.value_or(NAN));
    d.add(ref, "corr_counts", id, "", "", st.corr_counts.value_or(NAN));
  }
  return d;
}

// ---- writers ----

inline void write_table_csv(std::ostream& os, const TableResult& t, bool full = false) {
  os << "u";
  for (const auto& c : t.columns) os << "," << c;
  os << "\n";
  for (std::size_t r = 0; r < t.u.size(); ++r) {
    os << t.u[r];
    for (double v : t.values[r]) os << "," << format_number(v, full);
    os << "\n";
  }
}

inline void write_markov_csv(std::ostream& os, const MarkovResult& m, bool full = false) {
  const auto n = m.transition.rows();
  os << "row";
  for (Eigen::Index j = 0; j < n; ++j) os << ",level_" << j + 1;
  os << "\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    os << "level_" << i + 1;
    for (Eigen::Index j = 0; j < n; ++j) os << "," << format_number(m.transition(i, j), full);
    os << "\n";
  }
  os << "pi";
  for (Eigen::Index j = 0; j < n; ++j) os << "," << format_number(m.stationary(j), full);
  os << "\nexpected_premium," << format_number(m.expected_premium, full);
  for (Eigen::Index j = 1; j < n; ++j) os << ",";
  os << "\n";
}

inline void write_figure_csv(std::ostream& os, const FigureData& f, bool full = false) {
  os << "series,u,psi\n";
  for (const auto& s : f.series) {
    for (const auto& [u, v] : s.points) os << s.name << "," << u << "," << format_number(v, full) << "\n";
  }
}

}  // namespace ruinlab
