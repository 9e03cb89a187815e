// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

// Experiment runner.  `holoflow run --config cfg.json` executes one named
// suite and writes report.json, data.csv, and log.txt into the output
// directory; `holoflow list-catalogue` prints the family schemas.  Exit
// codes: 0 suite passed, 1 suite ran but a check or strict warning failed,
// 2 unreadable or invalid config (nothing is written), 3 catalogue
// resolution failure, 4 numeric failure while running.

#include "holoflow/suites.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace holoflow;

struct RunFlags {
  std::string config_path;
  std::optional<std::string> suite, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool strict = false;
};

// Reports embed the config echo but never the output path or a timestamp, so
// identical config and seed give byte-identical reports wherever they land.
Json report_json(const ExperimentConfig& cfg, const SuiteResult& result, bool pass) {
  Json checks = Json::array();
  for (const auto& c : result.checks) {
    Json j{{"id", c.id}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", c.pass}};
    if (!c.note.empty()) j["note"] = c.note;
    checks.push_back(std::move(j));
  }
  Json extras = Json::object();
  for (const auto& [key, value] : result.extras) extras[key] = value;
  return Json{{"suite", cfg.suite},    {"seed", cfg.seed},
              {"strict", cfg.strict},  {"pass", pass},
              {"checks", checks},      {"warnings", result.warnings},
              {"extras", extras},      {"config", cfg.echo}};
}

int run_command(const RunFlags& flags) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(flags.config_path);
    if (flags.suite) {
      bool known = false;
      for (const auto& s : suite_names()) known = known || s == *flags.suite;
      if (!known) throw ConfigParseError("config: unknown suite '" + *flags.suite + "'");
      cfg.suite = *flags.suite;
    }
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out_dir) cfg.out_dir = *flags.out_dir;
    if (flags.threads) cfg.threads = *flags.threads;
    if (flags.strict) cfg.strict = true;
  } catch (const ConfigParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  ResolvedExperiment resolved;
  try {
    resolved = resolve_experiment(cfg);
  } catch (const CatalogueError& e) {
    std::cerr << "catalogue: " << e.what() << "\n";
    return 3;
  }

  std::vector<std::string> log_lines;
  LogSink log = [&](const std::string& line) {
    log_lines.push_back(line);
    std::cout << line << "\n";
  };

  SuiteResult result;
  try {
    result = run_suite(cfg, resolved, log);
  } catch (const CatalogueError& e) {
    // a suite refusing its materials is a resolution problem, not a numeric one
    std::cerr << "catalogue: " << e.what() << "\n";
    return 3;
  } catch (const HoloflowError& e) {
    std::cerr << "numeric: " << e.what() << "\n";
    return 4;
  }

  bool strict_clean = !cfg.strict || result.warnings.empty();
  bool pass = result.pass() && strict_clean;
  for (const auto& w : result.warnings) {
    log(std::string(cfg.strict ? "FAIL (strict) warning: " : "warning: ") + w);
  }

  std::filesystem::create_directories(cfg.out_dir);
  {
    std::ofstream report(std::filesystem::path(cfg.out_dir) / "report.json");
    report << report_json(cfg, result, pass).dump(2) << "\n";
  }
  {
    std::ofstream csv(std::filesystem::path(cfg.out_dir) / "data.csv");
    write_csv(csv, result.series);
  }
  {
    std::ofstream logfile(std::filesystem::path(cfg.out_dir) / "log.txt");
    for (const auto& line : log_lines) logfile << line << "\n";
  }

  std::cout << (pass ? "PASS" : "FAIL") << " suite " << cfg.suite << ": "
            << result.checks.size() << " checks, " << result.warnings.size() << " warnings\n"
            << "report: " << (std::filesystem::path(cfg.out_dir) / "report.json").string() << "\n";
  return pass ? 0 : 1;
}

int list_catalogue(const std::optional<std::string>& config_path) {
  for (const auto& fam : catalogue_families()) {
    std::cout << fam.kind << " " << fam.id << ": " << fam.doc
              << (fam.torus_ok ? "" : "  [box charts only]") << "\n";
    for (const auto& p : fam.params) {
      std::cout << "    " << p.name << " (default " << format_double(p.fallback) << "): " << p.doc
                << "\n";
    }
  }
  if (!config_path) return 0;

  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(*config_path);
  } catch (const ConfigParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  std::cout << "\ndeclared instances in " << *config_path << ":\n";
  auto show = [](const char* kind, const std::vector<CatalogueDecl>& decls) {
    for (const auto& d : decls) std::cout << "  " << kind << " " << d.id << " = " << d.family << "\n";
  };
  std::cout << "  metric " << cfg.metric.id << " = " << cfg.metric.family << "\n";
  show("field", cfg.fields);
  show("connection", cfg.connections);
  show("gauge", cfg.gauges);
  show("function", cfg.functions);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flow-algebra experiment runner"};
  app.require_subcommand(1);

  RunFlags flags;
  CLI::App* run = app.add_subcommand("run", "run one experiment suite from a config file");
  run->add_option("--config", flags.config_path, "experiment config (JSON, comments allowed)")
      ->required();
  std::string suite_arg, out_arg;
  std::uint64_t seed_arg = 0;
  int threads_arg = 0;
  run->add_option("--suite", suite_arg, "override the suite named in the config");
  run->add_option("--seed", seed_arg, "override the experiment seed");
  run->add_option("--out", out_arg, "output directory for report.json, data.csv, log.txt");
  run->add_option("--threads", threads_arg, "worker threads for grid application");
  run->add_flag("--strict", flags.strict, "treat warnings as failures");

  std::string list_config;
  CLI::App* list = app.add_subcommand("list-catalogue", "print the catalogue family schemas");
  list->add_option("--config", list_config, "also list the instances a config declares");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad usage is a config problem
  }

  if (run->parsed()) {
    if (run->count("--suite")) flags.suite = suite_arg;
    if (run->count("--seed")) flags.seed = seed_arg;
    if (run->count("--out")) flags.out_dir = out_arg;
    if (run->count("--threads")) flags.threads = threads_arg;
    return run_command(flags);
  }
  return list_catalogue(list->count("--config") ? std::optional<std::string>(list_config)
                                                : std::nullopt);
}
