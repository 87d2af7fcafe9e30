// hypcap: capacity of hyperbolic disk constellations from the command line.
//
// Exit codes: 0 success, 1 table outside tolerance, 2 bad config or usage,
// 3 solver or geometry failure.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hypcap/cli.hpp"

namespace {

using hypcap::cli::json;

void emit(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
  } else {
    hypcap::cli::write_atomic(path, content);
  }
}

struct Args {
  std::string config;
  std::string out;
  std::string trace;
  std::string data_dir = HYPCAP_DATA_DIR;
  int n = 0;
  std::uint64_t seed = 0;
  int starts = 0;
  int id = 0;
};

bool given(const CLI::App& sub, const std::string& name) {
  const CLI::Option* opt = sub.get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

hypcap::cli::ExperimentConfig load(const Args& a, const CLI::App& sub, const std::string& command) {
  hypcap::cli::Overrides o;
  if (given(sub, "--n")) o.n = a.n;
  if (given(sub, "--seed")) o.seed = a.seed;
  if (given(sub, "--starts")) o.starts = a.starts;
  if (given(sub, "--out")) o.out = a.out;
  if (given(sub, "--trace")) o.trace = a.trace;
  json doc = hypcap::cli::read_json_file(a.config);
  if (doc.is_object() && !doc.contains("command")) doc["command"] = command;
  auto cfg = hypcap::cli::parse_config(hypcap::cli::apply_overrides(doc, o));
  if (cfg.command != command) {
    throw hypcap::cli::ConfigError("config: key 'command' is \"" + cfg.command + "\" but the subcommand runs \"" +
                                   command + "\"");
  }
  return cfg;
}

int run(const std::string& which, const Args& a, const CLI::App& sub) {
  if (which == "table") {
    hypcap::cli::TableOptions opts;
    if (given(sub, "--n")) opts.n = a.n;
    if (given(sub, "--seed")) opts.seed = a.seed;
    if (given(sub, "--starts")) opts.starts = a.starts;
    opts.data_dir = a.data_dir;
    const auto report = hypcap::cli::run_table(a.id, opts);
    std::cerr << hypcap::cli::format_table(report);
    const hypcap::cli::ResultRecord rec{json{{"command", "table"}, {"id", a.id}}, report.to_json(),
                                        hypcap::cli::provenance()};
    emit(a.out, rec.to_json().dump(2) + "\n");
    return report.passed ? 0 : 1;
  }

  const std::string command = which == "sweep" ? "sweep-two-disks" : which;
  const auto cfg = load(a, sub, command);
  if (command == "capacity") {
    emit(cfg.output.path, hypcap::cli::run_capacity(cfg).to_json().dump(2) + "\n");
  } else if (command == "maximize") {
    const auto result = hypcap::cli::run_maximize(cfg);
    if (!cfg.output.trace.empty()) hypcap::cli::write_atomic(cfg.output.trace, hypcap::cli::trace_csv(result.results));
    emit(cfg.output.path, result.record.to_json().dump(2) + "\n");
  } else if (command == "sweep-two-disks") {
    emit(cfg.output.path, hypcap::cli::sweep_csv(hypcap::cli::run_sweep_two_disks(cfg)));
  } else {
    emit(cfg.output.path, hypcap::cli::condense_csv(hypcap::cli::run_condense(cfg)));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal capacity of hyperbolic disk constellations"};
  app.require_subcommand(1);
  Args a;

  auto* capacity = app.add_subcommand("capacity", "Capacity of one constellation");
  auto* maximize = app.add_subcommand("maximize", "Maximize capacity over the disk centers");
  auto* sweep = app.add_subcommand("sweep", "Two-disk capacity sweep (CSV)");
  auto* condense = app.add_subcommand("condense", "Equal-capacity single disk over a radius grid (CSV)");
  auto* table = app.add_subcommand("table", "Rerun a reference table and compare");

  for (auto* sub : {capacity, maximize, sweep, condense}) {
    sub->add_option("--config", a.config, "Config file (JSON)")->required()->check(CLI::ExistingFile);
  }
  for (auto* sub : {capacity, maximize, sweep, condense, table}) {
    sub->add_option("--n", a.n, "Boundary nodes per circle")->check(CLI::Range(16, 1 << 20));
    sub->add_option("--out", a.out, "Output file; stdout when absent");
  }
  for (auto* sub : {maximize, table}) {
    sub->add_option("--seed", a.seed, "Multistart seed");
    sub->add_option("--starts", a.starts, "Number of random starts")->check(CLI::PositiveNumber);
  }
  maximize->add_option("--trace", a.trace, "Iteration trace (CSV)");
  table->add_option("--id", a.id, "Table number")->required()->check(CLI::Range(1, 7));
  table->add_option("--data", a.data_dir, "Directory with the reference tables");

  CLI11_PARSE(app, argc, argv);

  for (auto* sub : {capacity, maximize, sweep, condense, table}) {
    if (!sub->parsed()) continue;
    try {
      return run(sub->get_name(), a, *sub);
    } catch (const hypcap::cli::ConfigError& e) {
      std::cerr << "hypcap: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "hypcap: " << e.what() << "\n";
      return 3;
    }
  }
  return 2;
}
