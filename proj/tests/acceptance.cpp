// Acceptance report: one PASS/FAIL line per criterion, nonzero exit if any
// fails. --smoke trims the table and simulation work.

#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "random_instances.hpp"
#include "ruinlab/experiments.hpp"
#include "ruinlab/mc_oracle.hpp"

using namespace ruinlab;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome markov(const ReferenceSet& ref) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = reproduce_markov(ref);
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << m.diff.cells.size() - m.diff.failures() << "/" << m.diff.cells.size()
     << " cells, max dev " << m.diff.max_abs_deviation() << ", " << dt << " s";
  return {m.diff.passed() && dt < 1.0, os.str()};
}

Outcome tables(Reproducer& rep, const ReferenceSet& ref, bool smoke) {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t cells = 0, bad = 0;
  double worst = 0.0;
  std::string where;
  for (int k = 1; k <= 4; ++k) {
    const auto t = rep.table(k, ref, smoke);
    cells += t.diff.cells.size();
    bad += t.diff.failures();
    for (const auto& c : t.diff.cells) {
      if (c.deviation() > worst) {
        worst = c.deviation();
        where = c.where;
      }
    }
  }
  std::ostringstream os;
  os << cells - bad << "/" << cells << " cells within tolerance, max dev " << worst << " at " << where << ", "
     << seconds_since(t0) << " s";
  return {bad == 0 && cells == (smoke ? 24u : 264u), os.str()};
}

Outcome oracle() {
  std::mt19937_64 g(20240601);
  const double qs[] = {0.0, 0.3, 1.0};
  int n = 0;
  double worst = 0.0;
  for (Principle p : kAllPrinciples) {
    for (int it = 0; it < 30; ++it) {
      const auto q = instances::random_query(g, p, qs[it % 3]);
      worst = std::max(worst, std::abs(ruin_probability(q).value - exact_enumerate(q)));
      ++n;
    }
  }
  std::ostringstream os;
  os << n << " instances, max |solver - enumeration| = " << worst;
  return {worst <= 1e-12, os.str()};
}

Outcome monte_carlo(Reproducer& rep, bool smoke) {
  const auto& cat = ScenarioCatalog::standard();
  const std::size_t paths = smoke ? 100000 : 1000000;
  int cells = 0, inside = 0;
  std::string misses;
  std::uint64_t seed = 1;
  for (int k = 1; k <= 4; ++k) {
    const Principle p = table_principle(k);
    for (const auto& s : cat.scenarios()) {
      for (Amount u : {0, 20, 50}) {
        const double exact = rep.psi(p, s.label, u);
        const auto e = simulate(cat.query(p, s, u), paths, seed++);
        ++cells;
        if (std::abs(e.p_hat - exact) <= 3 * e.stderr_) {
          ++inside;
        } else {
          misses += " T" + std::to_string(k) + "/" + s.label + "/u" + std::to_string(u);
        }
      }
    }
  }
  std::ostringstream os;
  os << inside << "/" << cells << " cells within 3 stderr at " << paths << " paths";
  if (!misses.empty()) os << "; outside:" << misses;
  return {inside >= 0.95 * cells, os.str()};
}

// first failing check wins the detail line
struct Checks {
  bool pass = true;
  std::string first;
  void fail(const std::string& what) {
    if (pass) first = what;
    pass = false;
  }
};

Outcome invariants() {
  std::mt19937_64 g(777);
  instances::InstanceShape shape;
  shape.max_values = 4;
  shape.max_claim = 8;
  shape.max_horizon = 6;
  shape.max_u0 = 20;
  SolverOptions o;
  o.keep_layers = true;
  Checks c;
  std::string z_violation;
  int z_count = 0, instances = 0;
  for (Principle p : kAllPrinciples) {
    for (int it = 0; it < 50; ++it) {
      const double qq = it % 3 == 0 ? 0.0 : std::uniform_real_distribution<double>(0, 1)(g);
      const auto q = instances::random_query(g, p, qq, shape);
      const auto r = ruin_probability(q, o);
      const auto& layers = *r.layers;
      ++instances;
      for (std::size_t n = 0; n < layers.size(); ++n) {
        for (LevelIndex i = 1; i <= q.scale.size(); ++i) {
          for (Amount u = 0; u <= q.u0; ++u) {
            const double v = layers[n].psi(i, u);
            if (v < 0.0 || v > 1.0 + 1e-15) c.fail("range");
            if (u > 0 && v > layers[n].psi(i, u - 1) + 1e-15) c.fail("monotone in u");
            if (n > 0 && v < layers[n - 1].psi(i, u) - 1e-15) c.fail("monotone in n");
            for (Amount z = 2; z <= u + q.scale.premium(i) + 1; ++z) {
              const double a = layers[n].psi_prime(i, u, z - 1), b = layers[n].psi_prime(i, u, z);
              if (b < a - 1e-15) {
                ++z_count;
                if (z_violation.empty()) {
                  std::ostringstream os;
                  os << to_string(p) << " n=" << n << " i=" << i << " u=" << u << ": psi'(z=" << z - 1
                     << ")=" << a << " > psi'(z=" << z << ")=" << b;
                  z_violation = os.str();
                }
              }
            }
          }
        }
      }
    }
  }
  if (z_count > 0) c.fail("monotone in z (" + std::to_string(z_count) + " violations, first: " + z_violation + ")");

  // Lemma 1 on small instances, pathwise through the enumerator
  for (Principle p : {Principle::AggregateReported, Principle::ReportedCount}) {
    for (int it = 0; it < 20; ++it) {
      const auto q = instances::random_query(g, p, (it % 3) * 0.5);
      for (LevelIndex i = 1; i <= q.scale.size(); ++i) {
        for (Amount u = 1; u <= q.u0; ++u) {
          for (Amount z = 1; z <= u; ++z) {
            if (std::abs(enumerate_from(q, SimState{u, i, z}) - enumerate_from(q, SimState{u - z, i, std::nullopt})) >
                1e-12) {
              c.fail("Lemma 1 for " + std::string(to_string(p)));
            }
          }
        }
      }
    }
  }

  // no delay: settled principle equals its reported twin
  for (auto [rep, set] : {std::pair{Principle::AggregateReported, Principle::AggregateSettled},
                          std::pair{Principle::ReportedCount, Principle::SettledCount}}) {
    for (int it = 0; it < 30; ++it) {
      auto a = instances::random_query(g, rep, 0.0, shape);
      auto b = a;
      b.principle = set;
      const auto ra = ruin_probability(a), rb = ruin_probability(b);
      for (std::size_t i = 0; i < ra.surplus_profile.size(); ++i) {
        for (std::size_t u = 0; u < ra.surplus_profile[i].size(); ++u) {
          if (std::abs(ra.surplus_profile[i][u] - rb.surplus_profile[i][u]) > 1e-10) c.fail("q=0 equivalence");
        }
      }
    }
  }

  // tail identity for xi, random tables plus the built-in families
  instances::InstanceShape tab;
  tab.max_values = 5;
  tab.max_claim = 12;
  for (int it = 0; it < 40; ++it) {
    const auto d = instances::random_table(g, tab);
    for (Amount n = 0; n <= 30; ++n) {
      double brute = 0.0;
      for (Amount y = 1; y <= 12 + n; ++y) brute += d.xi(y, n);
      if (std::abs(d.xi_tail_sum(n) - brute) > 1e-14) c.fail("xi tail identity");
    }
  }
  for (char f : {'H', 'M', 'L'}) {
    const auto& d = ScenarioCatalog::standard().distribution(f);
    for (Amount n = 0; n <= 60; n += 5) {
      double brute = 0.0;
      for (Amount y = 1; y <= 400; ++y) brute += d.xi(y, n);
      if (std::abs(d.xi_tail_sum(n) - brute) > 1e-12) c.fail(std::string("xi tail identity for ") + f);
    }
  }

  std::ostringstream os;
  os << instances << " random instances";
  if (!c.pass) os << "; failed: " << c.first;
  return {c.pass, os.str()};
}

Outcome findings(Reproducer& rep) {
  const auto& cat = ScenarioCatalog::standard();
  Checks c;
  int compared = 0, curves = 0;
  // lower curve must sit pointwise at or below the higher one
  auto check_le = [&](Principle pl, const std::string& ll, Principle ph, const std::string& lh, const char* what) {
    bool ok = true;
    for (Amount u : cat.u_grid()) {
      const double lo = rep.psi(pl, ll, u), hi = rep.psi(ph, lh, u);
      ++compared;
      if (lo > hi && ok) {
        ok = false;
        ++curves;
        std::ostringstream os;
        os.precision(6);
        os << what << " at u=" << u << ": " << to_string(pl) << ":" << ll << "=" << lo << " > " << to_string(ph)
           << ":" << lh << "=" << hi;
        c.fail(os.str());
      }
    }
  };
  for (Principle p : kAllPrinciples) {
    for (char f : {'H', 'M', 'L'}) check_le(p, std::string{f, '2'}, p, std::string{f, '1'}, "q-ordering");
    for (char d : {'1', '2'}) {
      check_le(p, std::string{'M', d}, p, std::string{'H', d}, "H >= M");
      check_le(p, std::string{'L', d}, p, std::string{'M', d}, "M >= L");
    }
  }
  for (const auto& s : cat.scenarios()) {
    check_le(Principle::AggregateReported, s.label, Principle::AggregateSettled, s.label, "settled >= reported");
    check_le(Principle::ReportedCount, s.label, Principle::SettledCount, s.label, "settled >= reported");
  }
  std::ostringstream os;
  os << compared << " comparisons";
  if (!c.pass) os << ", " << curves << " failing curve pairs; first: " << c.first;
  return {c.pass, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  bool smoke = false;
  for (int a = 1; a < argc; ++a) {
    if (std::strcmp(argv[a], "--smoke") == 0) {
      smoke = true;
    } else {
      std::cerr << "usage: acceptance [--smoke]\n";
      return 1;
    }
  }
  std::cout.precision(3);
  try {
    const auto ref = ReferenceSet::load();
    Reproducer rep;
    const Outcome out[] = {markov(ref), tables(rep, ref, smoke), oracle(), monte_carlo(rep, smoke), invariants(),
                           findings(rep)};
    const char* names[] = {"Markov reproduction", "Table regression", "Oracle equivalence", "MC consistency",
                           "Invariant suite", "Qualitative findings"};
    bool all = true;
    for (int k = 0; k < 6; ++k) {
      std::cout << "Criterion " << k + 1 << ": " << (out[k].pass ? "PASS" : "FAIL") << " " << names[k] << " ("
                << out[k].detail << ")\n";
      all = all && out[k].pass;
    }
    return all ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
