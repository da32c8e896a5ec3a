#pragma once

// Command-line front end: ruin, simulate, markov, reproduce, sweep.
// Exit codes: 0 ok, 1 validation error, 2 reproduction diff beyond
// tolerance under --strict.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ruinlab/bonus_malus.hpp"
#include "ruinlab/config.hpp"
#include "ruinlab/experiments.hpp"
#include "ruinlab/mc_oracle.hpp"
#include "ruinlab/ruin_engine.hpp"

namespace ruinlab::cli {

enum class Format { Csv, Json };

struct CliConfig {
  std::string subcommand;
  std::string config_path;
  std::string out_path;
  std::string format;  // empty: subcommand default
  bool verbose = false;
  bool full_precision = false;
  std::uint64_t seed = 1;
  std::optional<unsigned> workers;
  std::optional<double> truncation_epsilon;

  // ruin
  std::string emit;
  // simulate
  std::int64_t paths = 1000000;
  // reproduce
  std::vector<int> tables;
  std::vector<int> figures;
  bool markov = false;
  bool smoke = false;
  bool strict = false;
  std::string outdir = "reproduction";
  std::string fixtures;
};

inline unsigned resolve_workers(const std::optional<unsigned>& flag) {
  if (flag) return std::max(1u, *flag);
  if (const char* env = std::getenv("RUINLAB_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("RUINLAB_WORKERS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

inline Format resolve_format(const std::string& s, Format fallback) {
  if (s.empty()) return fallback;
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  throw ConfigError("format must be csv or json, got '" + s + "'");
}

/// Writes to --out when given, otherwise stdout. The file is opened only
/// after validation.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot write " + path);
    }
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

inline void require_config(const CliConfig& c) {
  if (c.config_path.empty()) throw ConfigError(c.subcommand + ": --config is required");
}

inline std::filesystem::path config_base(const std::string& path) {
  return std::filesystem::path(path).parent_path();
}

inline double json_number(double v, bool full) { return std::stod(format_number(v, full)); }

inline int cmd_ruin(const CliConfig& c) {
  require_config(c);
  const auto raw = read_json_file(c.config_path);
  auto qc = parse_query(raw, config_base(c.config_path), c.truncation_epsilon);
  if (!c.emit.empty()) {
    if (c.emit == "value") {
      qc.emit = Emit::Value;
    } else if (c.emit == "grid") {
      qc.emit = Emit::Grid;
    } else {
      throw ConfigError("emit must be 'value' or 'grid'");
    }
  }
  const auto fmt = resolve_format(c.format, Format::Csv);
  SolverOptions o;
  o.workers = resolve_workers(c.workers);
  o.keep_layers = qc.emit == Emit::Grid;

  const auto r = ruin_probability(qc.query, o);
  if (c.verbose) {
    std::cerr << "solved " << to_string(qc.query.principle) << " in "
              << r.metadata.elapsed_seconds << " s\n";
  }
  Output out(c.out_path);
  auto& os = out.os();
  const bool full = c.full_precision;
  const auto& q = qc.query;
  if (qc.emit == Emit::Value) {
    if (fmt == Format::Csv) {
      os << format_number(r.value, full) << "\n";
    } else {
      Json j{{"psi", json_number(r.value, full)},
             {"principle", std::string(to_string(q.principle))},
             {"q", q.q},
             {"u0", q.u0},
             {"level0", q.i0},
             {"horizon", q.horizon},
             {"truncation_bound", r.truncation_bound}};
      os << j.dump(2) << "\n";
    }
    return 0;
  }
  const auto& layers = *r.layers;
  if (fmt == Format::Csv) {
    os << "n,level,u,psi\n";
  }
  Json rows = Json::array();
  for (const auto& layer : layers) {
    for (LevelIndex i = 1; i <= q.scale.size(); ++i) {
      for (Amount u = 0; u <= q.u0; ++u) {
        const double v = layer.psi(i, u);
        if (fmt == Format::Csv) {
          os << layer.horizon() << "," << i << "," << u << "," << format_number(v, full) << "\n";
        } else {
          rows.push_back({{"n", layer.horizon()}, {"level", i}, {"u", u}, {"psi", json_number(v, full)}});
        }
      }
    }
  }
  if (fmt == Format::Json) os << rows.dump(2) << "\n";
  return 0;
}

inline int cmd_simulate(const CliConfig& c) {
  if (c.paths < 1) throw ConfigError("paths must be ≥ 1");
  require_config(c);
  const auto raw = read_json_file(c.config_path);
  const auto qc = parse_query(raw, config_base(c.config_path), c.truncation_epsilon);
  const auto fmt = resolve_format(c.format, Format::Json);
  const auto workers = resolve_workers(c.workers);
  const auto e = simulate(qc.query, c.paths, c.seed, workers);
  Output out(c.out_path);
  auto& os = out.os();
  const bool full = c.full_precision;
  if (fmt == Format::Json) {
    Json j{{"p_hat", json_number(e.p_hat, full)},
           {"stderr", json_number(e.stderr_, full)},
           {"ci95", {json_number(e.ci95_lo, full), json_number(e.ci95_hi, full)}},
           {"n_paths", e.n_paths},
           {"seed", e.seed},
           {"rng_id", e.rng_id},
           {"overflow_mass", e.overflow_mass}};
    os << j.dump(2) << "\n";
  } else {
    os << "p_hat,stderr,ci95_lo,ci95_hi,n_paths,seed,rng_id\n"
       << format_number(e.p_hat, full) << "," << format_number(e.stderr_, full) << ","
       << format_number(e.ci95_lo, full) << "," << format_number(e.ci95_hi, full) << ","
       << e.n_paths << "," << e.seed << "," << e.rng_id << "\n";
  }
  return 0;
}

/// With --config {distribution, principle, scale?, rules?}: one chain.
/// Without: the six standard chains.
inline int cmd_markov(const CliConfig& c) {
  std::vector<MarkovResult> chains;
  if (!c.config_path.empty()) {
    const auto j = read_json_file(c.config_path);
    if (!j.is_object()) throw ConfigError("markov config: expected an object");
    detail::only_keys(j, {"distribution", "principle", "scale", "rules"}, "markov");
    MarkovResult m;
    m.principle = parse_principle_field(detail::get<Json>(j, "principle", "markov"));
    const auto dist = parse_distribution(detail::get<Json>(j, "distribution", "markov"),
                                         config_base(c.config_path), c.truncation_epsilon);
    const auto& cat = ScenarioCatalog::standard();
    const auto scale = j.contains("scale") ? parse_scale(j["scale"]) : cat.scale();
    const auto rules = j.contains("rules") ? parse_rules(j["rules"], scale.size())
                                           : cat.rules_for(m.principle);
    if (rules.level_count() != scale.size()) {
      throw ConfigError("markov: rules and scale disagree on the number of levels");
    }
    try {
      m.transition = transition_matrix(dist, rules, m.principle);
      m.stationary = stationary_distribution(m.transition);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    m.expected_premium = expected_premium(m.stationary, scale);
    m.family = '?';
    chains.push_back(std::move(m));
  } else {
    const auto ref = ReferenceSet::load(c.fixtures.empty() ? ReferenceSet::default_path()
                                                           : std::filesystem::path(c.fixtures));
    chains = reproduce_markov(ref).chains;
  }
  const auto fmt = resolve_format(c.format, Format::Csv);
  Output out(c.out_path);
  auto& os = out.os();
  const bool full = c.full_precision;
  if (fmt == Format::Csv) {
    for (const auto& m : chains) {
      if (chains.size() > 1) os << "# " << chain_id(m.principle, m.family) << "\n";
      write_markov_csv(os, m, full);
    }
    return 0;
  }
  Json arr = Json::array();
  for (const auto& m : chains) {
    Json mat = Json::array();
    for (Eigen::Index i = 0; i < m.transition.rows(); ++i) {
      Json row = Json::array();
      for (Eigen::Index k = 0; k < m.transition.cols(); ++k) row.push_back(json_number(m.transition(i, k), full));
      mat.push_back(row);
    }
    Json pi = Json::array();
    for (Eigen::Index k = 0; k < m.stationary.size(); ++k) pi.push_back(json_number(m.stationary(k), full));
    Json entry{{"principle", std::string(to_string(m.principle))},
               {"transition", mat},
               {"stationary", pi},
               {"expected_premium", json_number(m.expected_premium, full)}};
    if (m.family != '?') entry["distribution"] = std::string(1, m.family);
    arr.push_back(entry);
  }
  os << (chains.size() == 1 ? arr[0] : arr).dump(2) << "\n";
  return 0;
}

inline void write_file(const std::filesystem::path& p, const std::function<void(std::ostream&)>& fn) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  fn(f);
}

inline int cmd_reproduce(const CliConfig& c) {
  for (int k : c.tables) {
    if (k < 1 || k > 4) throw ConfigError("--table must be 1..4");
  }
  for (int k : c.figures) {
    if (k < 1 || k > 8) throw ConfigError("--figure must be 1..8");
  }
  if (c.smoke && !c.figures.empty()) throw ConfigError("--smoke applies to tables only");
  const auto ref = ReferenceSet::load(c.fixtures.empty() ? ReferenceSet::default_path()
                                                         : std::filesystem::path(c.fixtures));
  const auto workers = resolve_workers(c.workers);
  const bool everything = c.tables.empty() && c.figures.empty() && !c.markov;
  std::vector<int> tables = c.tables;
  std::vector<int> figures = c.figures;
  if (everything) {
    tables = {1, 2, 3, 4};
    if (!c.smoke) figures = {1, 2, 3, 4, 5, 6, 7, 8};
  }
  const bool do_markov = everything || c.markov;
  const std::filesystem::path dir(c.outdir);
  const bool full = c.full_precision;
  Reproducer rep(ScenarioCatalog::standard(), workers);
  std::vector<DiffReport> diffs;
  auto record = [&](const DiffReport& d) {
    write_file(dir / "diffs" / (d.name + ".txt"), [&](std::ostream& os) { d.render(os); });
    d.render(std::cout);
    diffs.push_back(d);
  };

  if (do_markov) {
    const auto m = reproduce_markov(ref);
    for (const auto& ch : m.chains) {
      write_file(dir / "markov" / (chain_id(ch.principle, ch.family) + ".csv"),
                 [&](std::ostream& os) { write_markov_csv(os, ch, full); });
    }
    record(m.diff);
    record(reproduce_statistics(ref));
  }
  for (int k : tables) {
    const auto t = rep.table(k, ref, c.smoke);
    write_file(dir / "tables" / ("table" + std::to_string(k) + ".csv"),
               [&](std::ostream& os) { write_table_csv(os, t, full); });
    record(t.diff);
  }
  for (int k : figures) {
    const auto f = rep.figure(k);
    write_file(dir / "figures" / ("fig" + std::to_string(k) + ".csv"),
               [&](std::ostream& os) { write_figure_csv(os, f, full); });
  }
  bool ok = true;
  for (const auto& d : diffs) ok = ok && d.passed();
  if (c.verbose) std::cerr << "outputs in " << dir.string() << "\n";
  return (c.strict && !ok) ? 2 : 0;
}

inline int cmd_sweep(const CliConfig& c) {
  require_config(c);
  const auto raw = read_json_file(c.config_path);
  const auto s = parse_sweep(raw, config_base(c.config_path), c.truncation_epsilon);
  const auto fmt = resolve_format(c.format, Format::Csv);
  SolverOptions o;
  o.workers = resolve_workers(c.workers);
  Amount top = 0;
  for (Amount u : s.us) top = std::max(top, u);

  struct Row {
    Principle p;
    double q;
    Amount u;
    double psi;
  };
  std::vector<Row> rows;
  for (Principle p : s.principles) {
    for (double q : s.qs) {
      RuinQuery query;
      query.principle = p;
      query.dist = s.dist;
      query.q = q;
      query.scale = s.scale;
      query.rules = is_count_principle(p) ? s.count_rules : s.aggregate_rules;
      query.u0 = top;
      query.i0 = s.level0;
      query.horizon = s.horizon;
      const auto r = ruin_probability(query, o);
      const auto& prof = r.surplus_profile[static_cast<std::size_t>(s.level0 - 1)];
      for (Amount u : s.us) rows.push_back({p, q, u, prof[static_cast<std::size_t>(u)]});
    }
  }
  Output out(c.out_path);
  auto& os = out.os();
  const bool full = c.full_precision;
  if (fmt == Format::Csv) {
    os << "principle,q,u,psi\n";
    for (const auto& r : rows) {
      os << to_string(r.p) << "," << format_number(r.q) << "," << r.u << ","
         << format_number(r.psi, full) << "\n";
    }
  } else {
    Json arr = Json::array();
    for (const auto& r : rows) {
      arr.push_back({{"principle", std::string(to_string(r.p))},
                     {"q", r.q},
                     {"u", r.u},
                     {"psi", json_number(r.psi, full)}});
    }
    os << arr.dump(2) << "\n";
  }
  return 0;
}

inline int run(int argc, const char* const* argv) {
  CliConfig c;
  CLI::App app{"ruinlab: finite-time ruin probabilities with delayed by-claims and bonus-malus premiums"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.add_option("--out", c.out_path, "Write output to this file instead of stdout");
  app.add_option("--format", c.format, "Output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--verbose,-v", c.verbose, "Progress messages on stderr");
  app.add_flag("--full-precision", c.full_precision, "Print 17 significant digits instead of 6");
  app.add_option("--workers", c.workers, "Worker threads (env RUINLAB_WORKERS as fallback)")
      ->check(CLI::PositiveNumber);
  app.add_option("--truncation-epsilon", c.truncation_epsilon,
                 "Tail mass ignored by truncated sums and the sampler box")
      ->check(CLI::Range(1e-300, 0.5));
  app.add_option("--seed", c.seed, "Seed for simulate");

  auto* ruin = app.add_subcommand("ruin", "Exact psi_i(u, n) for one query");
  ruin->add_option("--config", c.config_path, "Query JSON");
  ruin->add_option("--emit", c.emit, "value or grid")->check(CLI::IsMember({"value", "grid"}));

  auto* sim = app.add_subcommand("simulate", "Monte Carlo estimate for one query");
  sim->add_option("--config", c.config_path, "Query JSON");
  sim->add_option("--paths", c.paths, "Number of simulated paths");

  auto* markov = app.add_subcommand("markov", "Premium-level transition matrix and stationary law");
  markov->add_option("--config", c.config_path, "Chain JSON; omit for the six standard chains");
  markov->add_option("--fixtures", c.fixtures, "Reference values CSV");

  auto* repro = app.add_subcommand("reproduce", "Regenerate the numerical study and diff it");
  repro->add_option("--table", c.tables, "Table 1..4 (repeatable)");
  repro->add_option("--figure", c.figures, "Figure 1..8 (repeatable)");
  repro->add_flag("--markov", c.markov, "Transition matrices, stationary laws, premiums");
  repro->add_flag("--smoke", c.smoke, "u in {0,50,100}, scenarios H1 and L2 only");
  repro->add_flag("--strict", c.strict, "Exit 2 when any value is beyond tolerance");
  repro->add_option("--outdir", c.outdir, "Output directory");
  repro->add_option("--fixtures", c.fixtures, "Reference values CSV");

  auto* sweep = app.add_subcommand("sweep", "psi over a (principle, q, u) grid");
  sweep->add_option("--config", c.config_path, "Sweep JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  c.subcommand = app.get_subcommands().front()->get_name();

  try {
    if (c.subcommand == "ruin") return cmd_ruin(c);
    if (c.subcommand == "simulate") return cmd_simulate(c);
    if (c.subcommand == "markov") return cmd_markov(c);
    if (c.subcommand == "reproduce") return cmd_reproduce(c);
    if (c.subcommand == "sweep") return cmd_sweep(c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace ruinlab::cli
