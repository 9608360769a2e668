#pragma once

// Command-line front end: run | compare | check.
// Exit codes: 0 ok, 1 property failure, 2 usage or config error, 3 IO error.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "senseauction/csv.hpp"
#include "senseauction/error.hpp"
#include "senseauction/io.hpp"
#include "senseauction/pricing.hpp"
#include "senseauction/properties.hpp"
#include "senseauction/simengine.hpp"

namespace senseauction::cli {

enum Exit : int { ok = 0, property_failure = 1, usage = 2, io_failure = 3 };

inline constexpr const char* kSeedEnv = "SENSEAUCTION_SEED";

/// Per-run rows of a comparison sweep.
inline const char* compare_csv_header() {
  return "mechanism,scenario,fleet_size,seed,overreport,matching_rate,avg_wait_min,sensing_utility,coverage_rate,"
         "revenue,avg_u_driver,avg_u_rider";
}

/// Seed means per (mechanism, scenario, fleet size, over-report fraction).
inline const char* summary_csv_header() {
  return "mechanism,scenario,fleet_size,overreport,seeds,matching_rate,avg_wait_min,sensing_utility,coverage_rate,"
         "revenue,avg_u_driver,avg_u_rider";
}

/// DS seed means per over-report fraction, scenario and fleet size.
inline const char* table2_csv_header() { return "overreport,scenario,fleet_size,seeds,avg_u_driver,avg_u_rider,revenue"; }

/// What a command was asked to do; written next to its outputs.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<Mechanism> mechanisms;
  std::vector<std::size_t> fleet_sizes;
  std::vector<int> scenarios;
  std::vector<double> overreport;

  nlohmann::json to_json() const {
    std::vector<std::string> mech;
    for (auto m : mechanisms) mech.emplace_back(to_string(m));
    return {{"command", command},   {"config", config_path},     {"out", out_dir},
            {"seeds", seeds},       {"mechanisms", mech},        {"fleet_sizes", fleet_sizes},
            {"scenarios", scenarios}, {"overreport", overreport}};
  }
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
T parse_scalar(const std::string& text, const char* what) {
  std::istringstream in(text);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) throw UsageError(std::string("bad value '") + text + "' for " + what);
  return v;
}

/// Comma-separated list; an empty list is a usage error.
template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (item.empty()) throw UsageError(std::string("empty entry in ") + what);
    out.push_back(parse_scalar<T>(item, what));
  }
  if (out.empty()) throw UsageError(std::string("empty sweep: ") + what);
  return out;
}

inline Mechanism parse_mechanism(const std::string& s) {
  if (s == "vcg") return Mechanism::vcg;
  if (s == "ds") return Mechanism::ds;
  throw UsageError("mechanism must be vcg or ds");
}

inline std::vector<Mechanism> parse_mechanisms(const std::string& s) {
  if (s == "both") return {Mechanism::vcg, Mechanism::ds};
  std::vector<Mechanism> out;
  for (const auto& m : parse_list<std::string>(s, "--mechanism")) out.push_back(parse_mechanism(m));
  return out;
}

inline bool parse_switch(const std::string& s) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw UsageError("--floor must be on or off");
}

inline void parse_size(const std::string& s, std::size_t& drivers, std::size_t& riders) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw UsageError("--size must look like 6x6");
  drivers = parse_scalar<std::size_t>(s.substr(0, x), "--size");
  riders = parse_scalar<std::size_t>(s.substr(x + 1), "--size");
}

class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) throw IoError("cannot create output directory " + dir);
  }

  std::ofstream open(const std::string& name) const {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw IoError("cannot write " + (dir_ / name).string());
    return f;
  }

  void write(const std::string& name, const std::string& text) const {
    auto f = open(name);
    f << text;
    if (!f.flush()) throw IoError("cannot write " + (dir_ / name).string());
  }

  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

 private:
  std::filesystem::path dir_;
};

inline std::string csv_numbers(std::initializer_list<double> values) {
  std::string s;
  for (double v : values) s += ',' + format_number(v);
  return s;
}

/// Runs `work(i)` for i in [0, n) on `jobs` threads.
template <class Work>
void parallel_for(std::size_t n, unsigned jobs, const Work& work) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < n; i = next++) work(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// Options shared by the three commands, as parsed from the command line.
struct Options {
  std::string config_path;
  std::string mechanism;
  std::string seeds;
  std::string fleet;
  std::string scenario;
  std::string overreport;
  std::string floor;
  unsigned jobs = 1;
  std::string out = "out";
  std::size_t trials = 1000;
  std::string size = "6x6";
  bool random_sizes = false;
  std::string inject;
  std::string instance;
};

inline ScenarioConfig base_config(const Options& o) {
  ScenarioConfig c;
  if (!o.config_path.empty()) {
    try {
      c = io::load_config(o.config_path);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  }
  if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0') {
    c.seed = detail::parse_scalar<std::uint64_t>(env, kSeedEnv);
  }
  if (!o.floor.empty()) c.charge_floor = detail::parse_switch(o.floor);
  c.validate();
  return c;
}

// ---- run ----------------------------------------------------------------------

inline int cmd_run(const Options& o, std::ostream& out) {
  ScenarioConfig c = base_config(o);
  const Mechanism mechanism = detail::parse_mechanism(o.mechanism.empty() ? "ds" : o.mechanism);
  if (!o.seeds.empty()) {
    const auto seeds = detail::parse_list<std::uint64_t>(o.seeds, "--seeds");
    if (seeds.size() != 1) throw UsageError("run takes a single seed; use compare for sweeps");
    c.seed = seeds.front();
  }
  if (!o.fleet.empty()) c.fleet_size = detail::parse_scalar<std::size_t>(o.fleet, "--fleet");
  if (!o.scenario.empty()) c.scenario = detail::parse_scalar<int>(o.scenario, "--scenario");
  if (!o.overreport.empty()) c.overreport.fraction = detail::parse_scalar<double>(o.overreport, "--overreport");
  c.validate();

  const detail::OutputDir dir(o.out);
  auto events = dir.open("events.jsonl");
  auto settlements = dir.open("settlements.csv");
  auto coverage = dir.open("coverage.csv");
  const auto report = run_scenario(c, mechanism, {&events, &settlements, &coverage});

  std::ostringstream kpi;
  kpi << kpi_csv_header() << '\n';
  write_kpi_rows(kpi, report);
  dir.write("kpi.csv", kpi.str());
  RunManifest manifest{"run", o.config_path, o.out, {c.seed}, {mechanism}, {c.fleet_size}, {c.scenario},
                       {c.overreport.fraction}};
  nlohmann::json m = manifest.to_json();
  m["config_resolved"] = io::config_to_json(c);
  dir.write("manifest.json", m.dump(2) + "\n");
  for (auto* f : {&events, &settlements, &coverage}) {
    if (!f->flush()) throw IoError("cannot write run outputs in " + o.out);
  }

  const auto& a = report.aggregate;
  out << to_string(mechanism) << " scenario " << c.scenario << " fleet " << c.fleet_size << " seed " << c.seed
      << ": matching " << format_number(a.matching_rate) << ", sensing " << format_number(a.sensing_utility)
      << ", coverage " << format_number(a.coverage_rate) << ", revenue " << format_number(a.revenue) << '\n';
  return Exit::ok;
}

// ---- compare --------------------------------------------------------------------

struct SweepCell {
  Mechanism mechanism;
  int scenario;
  std::size_t fleet;
  double overreport;
  std::uint64_t seed;
};

/// Cross product in output order: mechanism, scenario, fleet, over-report, seed.
inline std::vector<SweepCell> sweep_cells(const RunManifest& m) {
  std::vector<SweepCell> cells;
  for (auto mech : m.mechanisms) {
    for (int sc : m.scenarios) {
      for (auto fleet : m.fleet_sizes) {
        for (double f : m.overreport) {
          for (auto seed : m.seeds) cells.push_back({mech, sc, fleet, f, seed});
        }
      }
    }
  }
  return cells;
}

inline int cmd_compare(const Options& o, std::ostream& out) {
  const ScenarioConfig base = base_config(o);
  RunManifest m;
  m.command = "compare";
  m.config_path = o.config_path;
  m.out_dir = o.out;
  m.mechanisms = o.mechanism.empty() ? std::vector<Mechanism>{Mechanism::vcg, Mechanism::ds}
                                     : detail::parse_mechanisms(o.mechanism);
  m.seeds = o.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : detail::parse_list<std::uint64_t>(o.seeds, "--seeds");
  m.fleet_sizes = o.fleet.empty() ? std::vector<std::size_t>{base.fleet_size}
                                  : detail::parse_list<std::size_t>(o.fleet, "--fleet");
  m.scenarios = o.scenario.empty() ? std::vector<int>{base.scenario} : detail::parse_list<int>(o.scenario, "--scenario");
  m.overreport = o.overreport.empty() ? std::vector<double>{base.overreport.fraction}
                                      : detail::parse_list<double>(o.overreport, "--overreport");

  const auto cells = sweep_cells(m);
  std::vector<ScenarioConfig> configs;
  for (const auto& cell : cells) {
    ScenarioConfig c = base;
    c.scenario = cell.scenario;
    c.fleet_size = cell.fleet;
    c.overreport.fraction = cell.overreport;
    c.seed = cell.seed;
    c.validate();
    configs.push_back(c);
  }
  const detail::OutputDir dir(o.out);

  std::vector<KpiRow> results(cells.size());
  detail::parallel_for(cells.size(), o.jobs,
                       [&](std::size_t i) { results[i] = run_scenario(configs[i], cells[i].mechanism).aggregate; });

  std::ostringstream runs;
  runs << compare_csv_header() << '\n';
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const auto& r = results[i];
    runs << to_string(c.mechanism) << ',' << c.scenario << ',' << c.fleet << ',' << c.seed << ','
         << format_number(c.overreport)
         << detail::csv_numbers({r.matching_rate, r.avg_wait_min, r.sensing_utility, r.coverage_rate, r.revenue,
                                 r.avg_u_driver, r.avg_u_rider})
         << '\n';
  }
  dir.write("compare.csv", runs.str());

  // Seeds are innermost, so each group of |seeds| consecutive cells is one summary row.
  const std::size_t n = m.seeds.size();
  const double inv = 1.0 / static_cast<double>(n);
  std::ostringstream summary;
  std::ostringstream table2;
  summary << summary_csv_header() << '\n';
  table2 << table2_csv_header() << '\n';
  std::map<std::tuple<double, int, std::size_t>, std::string> table2_rows;
  for (std::size_t g = 0; g < cells.size(); g += n) {
    KpiRow mean;
    for (std::size_t i = g; i < g + n; ++i) {
      const auto& r = results[i];
      mean.matching_rate += inv * r.matching_rate;
      mean.avg_wait_min += inv * r.avg_wait_min;
      mean.sensing_utility += inv * r.sensing_utility;
      mean.coverage_rate += inv * r.coverage_rate;
      mean.revenue += inv * r.revenue;
      mean.avg_u_driver += inv * r.avg_u_driver;
      mean.avg_u_rider += inv * r.avg_u_rider;
    }
    const auto& c = cells[g];
    summary << to_string(c.mechanism) << ',' << c.scenario << ',' << c.fleet << ',' << format_number(c.overreport)
            << ',' << n
            << detail::csv_numbers({mean.matching_rate, mean.avg_wait_min, mean.sensing_utility, mean.coverage_rate,
                                    mean.revenue, mean.avg_u_driver, mean.avg_u_rider})
            << '\n';
    if (c.mechanism == Mechanism::ds) {
      std::ostringstream row;
      row << format_number(c.overreport) << ',' << c.scenario << ',' << c.fleet << ',' << n
          << detail::csv_numbers({mean.avg_u_driver, mean.avg_u_rider, mean.revenue}) << '\n';
      table2_rows[{c.overreport, c.scenario, c.fleet}] = row.str();
    }
  }
  dir.write("summary.csv", summary.str());
  // Over-report sweeps also get the utilities-and-revenue table, ordered by fraction.
  if (m.overreport.size() > 1 && !table2_rows.empty()) {
    for (const auto& [key, row] : table2_rows) table2 << row;
    dir.write("table2.csv", table2.str());
  }
  dir.write("manifest.json", m.to_json().dump(2) + "\n");
  out << cells.size() << " runs written to " << o.out << '\n';
  return Exit::ok;
}

// ---- check ------------------------------------------------------------------------

inline properties::Injection parse_injection(const std::string& s) {
  properties::Injection inject;
  if (s.empty()) return inject;
  if (s == "skip-welfare-floor") {
    inject.skip_welfare_floor = true;
    return inject;
  }
  throw UsageError("unknown --inject '" + s + "' (known: skip-welfare-floor)");
}

inline void print_tally(std::ostream& out, const properties::SuiteReport& report) {
  for (std::size_t k = 0; k < properties::kPropertyCount; ++k) {
    const auto& t = report.tally[k];
    out << properties::kPropertyNames[k] << ": " << t.pass << " pass, " << t.fail << " fail, " << t.skipped
        << " skipped\n";
  }
}

inline int cmd_check(const Options& o, std::ostream& out, std::ostream& err) {
  const auto inject = parse_injection(o.inject);
  properties::SuiteReport report;
  if (!o.instance.empty()) {
    // Replay one saved instance through every property.
    properties::Instance inst;
    try {
      inst = io::load_instance(o.instance);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    std::mt19937_64 rng(o.seeds.empty() ? 1 : detail::parse_scalar<std::uint64_t>(o.seeds, "--seeds"));
    const auto outcomes = properties::check_all(inst, rng, inject);
    for (std::size_t k = 0; k < properties::kPropertyCount; ++k) {
      auto& t = report.tally[k];
      if (outcomes[k].status == properties::Status::pass) ++t.pass;
      if (outcomes[k].status == properties::Status::skipped) ++t.skipped;
      if (outcomes[k].status == properties::Status::fail) {
        ++t.fail;
        report.failures.push_back({0, properties::kPropertyNames[k], outcomes[k].detail, inst});
      }
    }
  } else {
    if (o.trials == 0) throw UsageError("--trials must be positive");
    properties::SuiteOptions so;
    so.trials = o.trials;
    detail::parse_size(o.size, so.drivers, so.riders);
    if (so.drivers == 0 || so.riders == 0 || so.drivers > oracle::kMaxSide || so.riders > oracle::kMaxSide) {
      throw UsageError("--size must lie between 1x1 and 8x8");
    }
    so.random_sizes = o.random_sizes;
    so.seed = o.seeds.empty() ? 1 : detail::parse_scalar<std::uint64_t>(o.seeds, "--seeds");
    if (const char* env = std::getenv(kSeedEnv); o.seeds.empty() && env != nullptr && *env != '\0') {
      so.seed = detail::parse_scalar<std::uint64_t>(env, kSeedEnv);
    }
    so.inject = inject;
    report = properties::run_suite(so);
  }
  print_tally(out, report);
  if (report.ok()) return Exit::ok;

  const detail::OutputDir dir(o.out);
  for (const auto& f : report.failures) {
    const std::string name = "failure_" + std::to_string(f.trial) + "_" + f.property + ".json";
    nlohmann::json j = io::instance_to_json(f.instance);
    dir.write(name, j.dump(2) + "\n");
    err << "FAIL " << f.property << " (trial " << f.trial << "): " << f.detail << "\n  replay: " << dir.path(name).string()
        << '\n';
  }
  err << io::instance_to_json(report.failures.front().instance).dump() << '\n';
  return Exit::property_failure;
}

// ---- entry point ------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Ride-hailing matching and pricing with drive-by sensing"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "scenario config JSON");
    sub->add_option("--seeds", o.seeds, "comma-separated seeds");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
  };
  auto add_sweep = [&](CLI::App* sub, bool lists) {
    sub->add_option("--mechanism", o.mechanism, lists ? "vcg, ds or both" : "vcg or ds");
    sub->add_option("--fleet", o.fleet, lists ? "fleet sizes, e.g. 20,40,60" : "fleet size");
    sub->add_option("--scenario", o.scenario, lists ? "demand scenarios, e.g. 1,2,3" : "demand scenario");
    sub->add_option("--overreport", o.overreport, lists ? "over-report fractions, e.g. 0,0.2,0.4,0.6" : "over-report fraction");
    sub->add_option("--floor", o.floor, "rider charge floor: on or off");
  };

  auto* run = app.add_subcommand("run", "simulate one scenario");
  add_common(run);
  add_sweep(run, false);
  auto* compare = app.add_subcommand("compare", "sweep mechanisms, scenarios, fleet sizes and seeds");
  add_common(compare);
  add_sweep(compare, true);
  compare->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
  auto* check = app.add_subcommand("check", "randomized property checks against brute force");
  add_common(check);
  check->add_option("--trials", o.trials, "random instances")->capture_default_str();
  check->add_option("--size", o.size, "drivers x riders, at most 8x8")->capture_default_str();
  check->add_flag("--random-sizes", o.random_sizes, "draw sizes uniformly up to --size");
  check->add_option("--inject", o.inject, "fault injection: skip-welfare-floor");
  check->add_option("--instance", o.instance, "replay one saved failure instance");

  try {
    app.parse(argc, argv);
    // An option given with an empty value is an empty sweep, not a default.
    for (auto* sub : {run, compare, check}) {
      for (const auto* opt : sub->get_options()) {
        if (opt->count() > 0 && opt->as<std::string>().empty()) {
          err << "usage: " << opt->get_name() << " is empty\n";
          return Exit::usage;
        }
      }
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return Exit::ok;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return Exit::usage;
  }

  try {
    if (run->parsed()) return cmd_run(o, out);
    if (compare->parsed()) return cmd_compare(o, out);
    return cmd_check(o, out, err);
  } catch (const UsageError& e) {
    err << "usage: " << e.what() << '\n';
    return Exit::usage;
  } catch (const ConfigError& e) {
    err << "config: " << e.what() << '\n';
    return Exit::usage;
  } catch (const IoError& e) {
    err << "io: " << e.what() << '\n';
    return Exit::io_failure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "io: " << e.what() << '\n';
    return Exit::io_failure;
  }
}

}  // namespace senseauction::cli
