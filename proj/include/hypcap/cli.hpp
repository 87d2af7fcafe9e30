#pragma once

// Experiment front end: JSON configs in, JSON records and CSV series out.
// Reference values for `table` live in data/tableN.json.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypcap/bie.hpp"
#include "hypcap/errors.hpp"
#include "hypcap/geometry.hpp"
#include "hypcap/optim.hpp"
#include "hypcap/specialfn.hpp"

#ifndef HYPCAP_DATA_DIR
#define HYPCAP_DATA_DIR "data"
#endif

namespace hypcap::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

/// Malformed or inconsistent configuration; the message names the key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Units { Hyperbolic, Euclidean };
enum class SweepKind { Angular, Linear };

/// One disk as given in a config: center and radius, in `units`.
struct DiskInput {
  double x = 0.0;
  double y = 0.0;
  double r = 0.0;
};

struct SolverConfig {
  int n = 256;
  double gmres_tol = 1e-14;
};

struct OptimizerConfig {
  std::uint64_t seed = 1;
  int starts = 5;
  /// Projected-gradient tolerance of the local solver.
  double tol = 1e-4;
  /// Fidelity of the inner iterations; solver.n is used for the polish.
  int n_solver = 64;
  double dedup_tol = 1e-3;
  double margin = 1e-6;
  bool symmetry_pin = true;
};

struct SweepConfig {
  SweepKind kind = SweepKind::Angular;
  double r = 0.1;
  /// Circle |z| = R for the angular sweep, largest |x| for the linear one.
  double R = 0.5;
  int points = 101;
  std::optional<double> from;
  std::optional<double> to;
};

struct CondenseConfig {
  int m = 6;
  double R = 0.75;
  double r_min = 0.1;
  double r_max = 1.2;
  int points = 23;
};

struct OutputConfig {
  std::string path;
  std::string trace;
};

struct ExperimentConfig {
  std::string command;
  Units units = Units::Hyperbolic;
  std::vector<DiskInput> disks;
  /// maximize: fixed hyperbolic radii and an optional start.
  std::vector<double> radii;
  std::vector<Complex> start;
  ConstraintSpec constraint;
  SolverConfig solver;
  OptimizerConfig optimizer;
  SweepConfig sweep;
  CondenseConfig condense;
  OutputConfig output;
  /// The effective config, echoed into every record.
  json source;
};

struct Overrides {
  std::optional<int> n;
  std::optional<std::uint64_t> seed;
  std::optional<int> starts;
  std::optional<std::string> out;
  std::optional<std::string> trace;
};

namespace detail {

/// View of one JSON object that type-checks every read and rejects keys
/// nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + (path_.empty() ? "<root>" : path_) + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    return has(key) ? as<T>(key) : fallback;
  }

  template <class T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) throw ConfigError("config: missing key '" + name(key) + "'");
    return as<T>(key);
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(j_.at(key), name(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("config: unknown key '" + name(item.key()) + "'");
    }
  }

 private:
  template <class T>
  T as(const std::string& key) const {
    const json& v = j_.at(key);
    auto fail = [&](const char* what) -> ConfigError {
      return ConfigError("config: key '" + name(key) + "' must be " + what);
    };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw fail("a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw fail("a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw fail("an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return v.get<T>();
        if (v.get<std::int64_t>() < 0) throw fail("a nonnegative integer");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw fail("a number");
      return v.get<T>();
    } else {
      static_assert(std::is_same_v<T, std::vector<double>>);
      if (!v.is_array()) throw fail("an array of numbers");
      std::vector<double> out;
      for (const auto& e : v) {
        if (!e.is_number()) throw fail("an array of numbers");
        out.push_back(e.get<double>());
      }
      return out;
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::vector<DiskInput> ring_disks(int m, double R, double r) {
  std::vector<DiskInput> out;
  for (int j = 0; j < m; ++j) {
    const Complex c = std::polar(R, 2.0 * std::numbers::pi * j / m);
    out.push_back({c.real(), c.imag(), r});
  }
  return out;
}

inline void parse_constellation(Section s, ExperimentConfig& cfg) {
  const std::string units = s.get<std::string>("units", "hyperbolic");
  if (units == "hyperbolic") {
    cfg.units = Units::Hyperbolic;
  } else if (units == "euclidean") {
    cfg.units = Units::Euclidean;
  } else {
    throw ConfigError("config: key '" + s.name("units") + "' must be \"hyperbolic\" or \"euclidean\"");
  }
  if (s.has("disks") && s.has("ring")) {
    throw ConfigError("config: give either '" + s.name("disks") + "' or '" + s.name("ring") + "', not both");
  }
  if (s.has("disks")) {
    const json& arr = s.raw("disks");
    if (!arr.is_array()) throw ConfigError("config: key '" + s.name("disks") + "' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const json& d = arr[i];
      if (!d.is_array() || d.size() != 3 || !d[0].is_number() || !d[1].is_number() || !d[2].is_number()) {
        throw ConfigError("config: key '" + s.name("disks") + "[" + std::to_string(i) +
                          "]' must be [center_x, center_y, radius]");
      }
      cfg.disks.push_back({d[0].get<double>(), d[1].get<double>(), d[2].get<double>()});
    }
  } else if (s.has("ring")) {
    Section ring = s.child("ring");
    const int m = ring.require<int>("m");
    if (m < 1) throw ConfigError("config: key '" + ring.name("m") + "' must be positive");
    cfg.disks = ring_disks(m, ring.require<double>("R"), ring.require<double>("r"));
    ring.finish();
  }
  if (s.has("radii")) cfg.radii = s.get<std::vector<double>>("radii", {});
  if (s.has("start")) {
    const json& arr = s.raw("start");
    if (!arr.is_array()) throw ConfigError("config: key '" + s.name("start") + "' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const json& p = arr[i];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw ConfigError("config: key '" + s.name("start") + "[" + std::to_string(i) + "]' must be [x, y]");
      }
      cfg.start.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
  }
  s.finish();
}

inline ConstraintSpec parse_constraint(Section s) {
  ConstraintSpec c;
  const std::string kind = s.get<std::string>("kind", "disk");
  if (kind == "disk") {
    c.kind = ConstraintKind::DiskCenters;
  } else if (kind == "interval") {
    c.kind = ConstraintKind::IntervalCenters;
  } else {
    throw ConfigError("config: key '" + s.name("kind") + "' must be \"disk\" or \"interval\"");
  }
  c.R = s.get<double>("R", c.R);
  c.whole_disk = s.get<bool>("whole_disk", false);
  s.finish();
  if (!(c.R > 0.0 && c.R < 1.0)) throw ConfigError("config: key '" + s.name("R") + "' must lie in (0, 1)");
  return c;
}

inline void require_positive(bool ok, const std::string& key, const char* what) {
  if (!ok) throw ConfigError("config: key '" + key + "' must be " + what);
}

}  // namespace detail

inline const std::set<std::string>& known_commands() {
  static const std::set<std::string> names{"capacity", "maximize", "sweep-two-disks", "condense", "table"};
  return names;
}

/// Typed view of a config document; throws ConfigError naming the key.
inline ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  cfg.source = doc;
  detail::Section root(doc, "");
  cfg.command = root.require<std::string>("command");
  if (!known_commands().count(cfg.command)) {
    throw ConfigError("config: key 'command' has unknown value \"" + cfg.command + "\"");
  }
  if (root.has("constellation")) detail::parse_constellation(root.child("constellation"), cfg);
  if (root.has("constraint")) cfg.constraint = detail::parse_constraint(root.child("constraint"));
  if (root.has("solver")) {
    auto s = root.child("solver");
    cfg.solver.n = s.get<int>("n", cfg.solver.n);
    cfg.solver.gmres_tol = s.get<double>("gmres_tol", cfg.solver.gmres_tol);
    s.finish();
    detail::require_positive(cfg.solver.n >= 16 && cfg.solver.n % 2 == 0, s.name("n"), "even and at least 16");
    detail::require_positive(cfg.solver.gmres_tol > 0.0, s.name("gmres_tol"), "positive");
  }
  if (root.has("optimizer")) {
    auto s = root.child("optimizer");
    OptimizerConfig& o = cfg.optimizer;
    o.seed = s.get<std::uint64_t>("seed", o.seed);
    o.starts = s.get<int>("starts", o.starts);
    o.tol = s.get<double>("tol", o.tol);
    o.n_solver = s.get<int>("n_solver", o.n_solver);
    o.dedup_tol = s.get<double>("dedup_tol", o.dedup_tol);
    o.margin = s.get<double>("margin", o.margin);
    o.symmetry_pin = s.get<bool>("symmetry_pin", o.symmetry_pin);
    s.finish();
    detail::require_positive(o.starts >= 1, s.name("starts"), "at least 1");
    detail::require_positive(o.tol > 0.0, s.name("tol"), "positive");
    detail::require_positive(o.n_solver >= 16 && o.n_solver % 2 == 0, s.name("n_solver"), "even and at least 16");
    detail::require_positive(o.dedup_tol >= 0.0, s.name("dedup_tol"), "nonnegative");
    detail::require_positive(o.margin >= 0.0, s.name("margin"), "nonnegative");
  }
  if (root.has("sweep")) {
    auto s = root.child("sweep");
    SweepConfig& w = cfg.sweep;
    const std::string kind = s.get<std::string>("kind", "angular");
    if (kind == "angular") {
      w.kind = SweepKind::Angular;
    } else if (kind == "linear") {
      w.kind = SweepKind::Linear;
    } else {
      throw ConfigError("config: key '" + s.name("kind") + "' must be \"angular\" or \"linear\"");
    }
    w.r = s.get<double>("r", w.r);
    w.R = s.get<double>("R", w.R);
    w.points = s.get<int>("points", w.points);
    if (s.has("from")) w.from = s.get<double>("from", 0.0);
    if (s.has("to")) w.to = s.get<double>("to", 0.0);
    s.finish();
    detail::require_positive(w.r > 0.0, s.name("r"), "positive");
    detail::require_positive(w.R > 0.0 && w.R < 1.0, s.name("R"), "in (0, 1)");
    detail::require_positive(w.points >= 1, s.name("points"), "at least 1");
  }
  if (root.has("condense")) {
    auto s = root.child("condense");
    CondenseConfig& c = cfg.condense;
    c.m = s.get<int>("m", c.m);
    c.R = s.get<double>("R", c.R);
    c.r_min = s.get<double>("r_min", c.r_min);
    c.r_max = s.get<double>("r_max", c.r_max);
    c.points = s.get<int>("points", c.points);
    s.finish();
    detail::require_positive(c.m >= 1, s.name("m"), "at least 1");
    detail::require_positive(c.R >= 0.0 && c.R < 1.0, s.name("R"), "in [0, 1)");
    detail::require_positive(c.r_min > 0.0 && c.r_max >= c.r_min, s.name("r_max"), "at least r_min > 0");
    detail::require_positive(c.points >= 1, s.name("points"), "at least 1");
  }
  if (root.has("output")) {
    auto s = root.child("output");
    cfg.output.path = s.get<std::string>("path", "");
    cfg.output.trace = s.get<std::string>("trace", "");
    s.finish();
  }
  root.finish();

  if (cfg.command == "capacity" && cfg.disks.empty()) {
    throw ConfigError("config: command \"capacity\" needs 'constellation.disks' or 'constellation.ring'");
  }
  if (cfg.command == "maximize") {
    if (!cfg.disks.empty()) {
      // disks given: their radii are fixed and their centers are the start
      if (cfg.units == Units::Euclidean) {
        throw ConfigError("config: command \"maximize\" takes hyperbolic 'constellation.disks'");
      }
      if (!cfg.radii.empty() || !cfg.start.empty()) {
        throw ConfigError("config: give 'constellation.disks' or 'constellation.radii', not both");
      }
      for (const auto& d : cfg.disks) {
        cfg.radii.push_back(d.r);
        cfg.start.emplace_back(d.x, d.y);
      }
    }
    if (cfg.radii.empty()) throw ConfigError("config: command \"maximize\" needs 'constellation.radii'");
    if (!cfg.start.empty() && cfg.start.size() != cfg.radii.size()) {
      throw ConfigError("config: 'constellation.start' and 'constellation.radii' differ in length");
    }
  }
  return cfg;
}

/// Writes the overrides into the document so that the echoed config
/// reproduces the run.
inline json apply_overrides(json doc, const Overrides& o) {
  if (!doc.is_object()) throw ConfigError("config: '<root>' must be an object");
  auto section = [&doc](const char* key) -> json& {
    json& s = doc[key];
    if (s.is_null()) s = json::object();
    if (!s.is_object()) throw ConfigError(std::string("config: '") + key + "' must be an object");
    return s;
  };
  if (o.n) section("solver")["n"] = *o.n;
  if (o.seed) section("optimizer")["seed"] = *o.seed;
  if (o.starts) section("optimizer")["starts"] = *o.starts;
  if (o.out) section("output")["path"] = *o.out;
  if (o.trace) section("output")["trace"] = *o.trace;
  return doc;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path, const Overrides& o = {}) {
  return parse_config(apply_overrides(read_json_file(path), o));
}

/// Writes `content` to a sibling temporary file and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct ResultRecord {
  json config;
  json outputs;
  json provenance;

  json to_json() const { return json{{"config", config}, {"outputs", outputs}, {"provenance", provenance}}; }

  static ResultRecord from_json(const json& j) {
    for (const char* key : {"config", "outputs", "provenance"}) {
      if (!j.contains(key)) throw ConfigError(std::string("record: missing key '") + key + "'");
    }
    return {j.at("config"), j.at("outputs"), j.at("provenance")};
  }
};

inline json provenance() { return json{{"program", "hypcap"}, {"version", kVersion}, {"timestamp", utc_timestamp()}}; }

inline json point_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline json points_json(std::span<const Complex> zs) {
  json out = json::array();
  for (const Complex z : zs) out.push_back(point_json(z));
  return out;
}

/// The configured disks as hyperbolic disks plus their Euclidean circles.
/// Euclidean input is kept as given for the solve.
inline std::pair<Constellation, std::vector<EuclideanCircle>> build_constellation(const ExperimentConfig& cfg) {
  std::vector<HyperbolicDisk> hyp;
  std::vector<EuclideanCircle> euc;
  for (const auto& d : cfg.disks) {
    const Complex c{d.x, d.y};
    if (cfg.units == Units::Euclidean) {
      euc.emplace_back(c, d.r);
      hyp.push_back(euclidean_to_hyp(euc.back()));
    } else {
      hyp.emplace_back(c, d.r);
      euc.push_back(hyp_to_euclidean(hyp.back()));
    }
  }
  return {Constellation(std::move(hyp)), std::move(euc)};
}

inline ResultRecord run_capacity(const ExperimentConfig& cfg) {
  const auto [constellation, circles] = build_constellation(cfg);
  SolverOptions opts;
  opts.gmres_tol = cfg.solver.gmres_tol;
  const CapacityResult res = capacity(std::span<const EuclideanCircle>(circles), cfg.solver.n, opts);

  const std::vector<Complex> centers = constellation.centers();
  json radii = json::array();
  for (const auto& d : constellation.disks()) radii.push_back(d.radius());
  json out;
  out["cap"] = res.cap;
  out["n"] = res.n;
  out["a"] = res.a;
  out["b"] = res.b;
  out["centers"] = points_json(centers);
  out["radii"] = radii;
  out["distances"] = adjacent_distances(centers, centers.size() > 2);
  out["h_spread"] = res.h_spread;
  out["gmres_iterations"] = res.gmres_iterations;
  out["gmres_residuals"] = res.gmres_residuals;
  out["alpha"] = point_json(res.alpha);
  out["warnings"] = res.warnings;
  return {cfg.source, out, provenance()};
}

inline OptimizationProblem problem_of(const ExperimentConfig& cfg) {
  OptimizationProblem p;
  p.radii = cfg.radii;
  p.constraint = cfg.constraint;
  p.symmetry_pin = cfg.optimizer.symmetry_pin;
  p.n_solver = cfg.optimizer.n_solver;
  p.n_polish = cfg.solver.n;
  p.margin = cfg.optimizer.margin;
  return p;
}

inline MaximizeOptions options_of(const ExperimentConfig& cfg) {
  MaximizeOptions o;
  o.stationarity_tol = cfg.optimizer.tol;
  return o;
}

inline json optimization_json(const OptimizationResult& r, ConstraintKind kind) {
  json out;
  out["cap"] = r.cap;
  out["n"] = r.n;
  out["centers"] = points_json(r.centers);
  out["distances"] = neighbour_distances(r.centers, kind);
  out["b"] = r.b;
  out["converged"] = r.converged;
  out["projected_gradient"] = r.projected_gradient;
  out["violation"] = r.violation;
  out["one_sided"] = r.one_sided;
  out["evaluations"] = r.evaluations;
  out["iterations"] = r.iterations;
  return out;
}

struct MaximizeRun {
  ResultRecord record;
  std::vector<OptimizationResult> results;
};

/// A given start runs maximize once; otherwise a seeded multistart whose
/// distinct capacity levels are reported best first.
inline MaximizeRun run_maximize(const ExperimentConfig& cfg) {
  const OptimizationProblem problem = problem_of(cfg);
  const MaximizeOptions opts = options_of(cfg);
  MaximizeRun run;
  if (!cfg.start.empty()) {
    run.results.push_back(maximize(cfg.start, problem, opts));
  } else {
    run.results = multistart(problem, cfg.optimizer.starts, cfg.optimizer.seed, opts, cfg.optimizer.dedup_tol);
  }
  json levels = json::array();
  for (const auto& r : run.results) levels.push_back(optimization_json(r, problem.constraint.kind));
  json out;
  out["cap"] = run.results.front().cap;
  out["levels"] = levels;
  run.record = {cfg.source, out, provenance()};
  return run;
}

/// Iterates of every run: run, iteration, n, mu, cap, violation, flags,
/// then x_j, y_j per disk.
inline std::string trace_csv(const std::vector<OptimizationResult>& runs) {
  std::ostringstream os;
  const std::size_t m = runs.empty() ? 0 : runs.front().centers.size();
  os << "run,iteration,n,mu,cap,violation,accepted,one_sided";
  for (std::size_t j = 1; j <= m; ++j) os << ",x" << j << ",y" << j;
  os << "\n";
  for (std::size_t k = 0; k < runs.size(); ++k) {
    for (const auto& t : runs[k].trace) {
      os << k << "," << t.iteration << "," << t.n << "," << format_number(t.mu) << "," << format_number(t.cap) << ","
         << format_number(t.violation) << "," << t.accepted << "," << t.one_sided;
      for (const Complex z : t.centers) os << "," << format_number(z.real()) << "," << format_number(z.imag());
      os << "\n";
    }
  }
  return os.str();
}

struct SweepRow {
  double parameter = 0.0;
  double cap = std::numeric_limits<double>::quiet_NaN();
  /// Single-disk capacity; cap exceeds it by monotonicity.
  double lower_bound = 0.0;
  /// Twice the single-disk capacity; cap stays below it by subadditivity.
  double upper_bound = 0.0;
  bool feasible = false;
  std::string note;
};

struct SweepResult {
  SweepKind kind = SweepKind::Angular;
  std::vector<SweepRow> rows;
};

/// Two disks of radius r, centered at R e^{+-i theta} (angular) or at +-x
/// (linear). The default grid takes cell midpoints of the open range where
/// the disks are disjoint; points outside it are kept as flagged rows.
inline SweepResult run_sweep_two_disks(const ExperimentConfig& cfg) {
  const SweepConfig& w = cfg.sweep;
  SweepResult out;
  out.kind = w.kind;
  double lo = 0.0;
  double hi = 0.0;
  if (w.kind == SweepKind::Angular) {
    const double theta_min = min_separation_angle(w.R, w.r);
    lo = w.from.value_or(theta_min);
    hi = w.to.value_or(std::numbers::pi - theta_min);
  } else {
    lo = w.from.value_or(std::tanh(0.5 * w.r));
    hi = w.to.value_or(w.R);
  }
  const double single = hyp_disk_capacity(w.r);
  SolverOptions opts;
  opts.gmres_tol = cfg.solver.gmres_tol;
  for (int i = 0; i < w.points; ++i) {
    SweepRow row;
    row.parameter = lo + (hi - lo) * (i + 0.5) / w.points;
    row.lower_bound = single;
    row.upper_bound = 2.0 * single;
    Complex z1, z2;
    if (w.kind == SweepKind::Angular) {
      z1 = std::polar(w.R, row.parameter);
      z2 = std::conj(z1);
    } else {
      z1 = {row.parameter, 0.0};
      z2 = -z1;
    }
    if (!(std::abs(z1) < 1.0)) {
      row.note = "center outside the unit disk";
    } else if (!disks_disjoint({z1, w.r}, {z2, w.r})) {
      row.note = "disks overlap";
    } else {
      try {
        const Constellation c({HyperbolicDisk(z1, w.r), HyperbolicDisk(z2, w.r)});
        const CapacityResult res = capacity(c, cfg.solver.n, opts);
        row.cap = res.cap;
        row.feasible = true;
        if (!res.warnings.empty()) row.note = res.warnings.front();
      } catch (const std::exception& e) {
        row.note = e.what();
      }
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (const char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

/// Columns: theta|x, cap, lower_bound, upper_bound, feasible, note.
inline std::string sweep_csv(const SweepResult& s) {
  std::ostringstream os;
  os << (s.kind == SweepKind::Angular ? "theta" : "x") << ",cap,lower_bound,upper_bound,feasible,note\n";
  for (const auto& r : s.rows) {
    os << format_number(r.parameter) << "," << format_number(r.cap) << "," << format_number(r.lower_bound) << ","
       << format_number(r.upper_bound) << "," << (r.feasible ? 1 : 0) << "," << csv_field(r.note) << "\n";
  }
  return os.str();
}

struct CondenseRow {
  double r = 0.0;
  double cap = 0.0;
  /// Radius of the centered disk with the same capacity.
  double R = 0.0;
  double area_disks = 0.0;
  double perimeter_disks = 0.0;
  double area_single = 0.0;
  double perimeter_single = 0.0;
  /// |hyp_disk_capacity(R) - cap|
  double roundtrip = 0.0;
};

/// m disks of radius r centered at R e^{2 pi i j/m}, swept over r.
inline std::vector<CondenseRow> run_condense(const ExperimentConfig& cfg) {
  const CondenseConfig& c = cfg.condense;
  SolverOptions opts;
  opts.gmres_tol = cfg.solver.gmres_tol;
  std::vector<CondenseRow> rows;
  for (int i = 0; i < c.points; ++i) {
    CondenseRow row;
    row.r = c.points == 1 ? c.r_min : c.r_min + (c.r_max - c.r_min) * i / (c.points - 1);
    std::vector<HyperbolicDisk> disks;
    for (const auto& d : detail::ring_disks(c.m, c.R, row.r)) disks.emplace_back(Complex{d.x, d.y}, d.r);
    row.cap = capacity(Constellation(std::move(disks)), cfg.solver.n, opts).cap;
    row.R = condense_radius(row.cap);
    row.area_disks = c.m * hyp_area(row.r);
    row.perimeter_disks = c.m * hyp_perimeter(row.r);
    row.area_single = hyp_area(row.R);
    row.perimeter_single = hyp_perimeter(row.R);
    row.roundtrip = std::abs(hyp_disk_capacity(row.R) - row.cap);
    rows.push_back(row);
  }
  return rows;
}

inline std::string condense_csv(const std::vector<CondenseRow>& rows) {
  std::ostringstream os;
  os << "r,cap,R,area_disks,perimeter_disks,area_single,perimeter_single,roundtrip\n";
  for (const auto& r : rows) {
    os << format_number(r.r) << "," << format_number(r.cap) << "," << format_number(r.R) << ","
       << format_number(r.area_disks) << "," << format_number(r.perimeter_disks) << ","
       << format_number(r.area_single) << "," << format_number(r.perimeter_single) << ","
       << format_number(r.roundtrip) << "\n";
  }
  return os.str();
}

struct TableRow {
  std::string label;
  double reference = 0.0;
  double computed = std::numeric_limits<double>::quiet_NaN();
  double deviation = std::numeric_limits<double>::quiet_NaN();
  /// Largest gap deviation up to symmetry; NaN when no pattern is stored.
  double pattern_deviation = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> distances;
  bool converged = false;
  bool pass = false;
  std::string note;
};

struct TableReport {
  int id = 0;
  std::string description;
  double tolerance = 0.0;
  double pattern_tolerance = 0.0;
  std::vector<TableRow> rows;
  /// Capacity levels found by a multistart that no reference row claimed.
  std::vector<double> unmatched;
  std::string error;
  bool passed = false;

  json to_json() const {
    json rs = json::array();
    for (const auto& r : rows) {
      rs.push_back(json{{"case", r.label},
                        {"reference", r.reference},
                        {"computed", std::isnan(r.computed) ? json(nullptr) : json(r.computed)},
                        {"deviation", std::isnan(r.deviation) ? json(nullptr) : json(r.deviation)},
                        {"pattern_deviation",
                         std::isnan(r.pattern_deviation) ? json(nullptr) : json(r.pattern_deviation)},
                        {"distances", r.distances},
                        {"converged", r.converged},
                        {"pass", r.pass},
                        {"note", r.note}});
    }
    return json{{"id", id},
                {"description", description},
                {"tolerance", tolerance},
                {"pattern_tolerance", pattern_tolerance},
                {"rows", rs},
                {"unmatched_levels", unmatched},
                {"error", error},
                {"passed", passed}};
  }
};

struct TableOptions {
  std::optional<int> n;
  std::optional<std::uint64_t> seed;
  std::optional<int> starts;
  std::string data_dir = HYPCAP_DATA_DIR;
};

namespace detail {

/// Order-preserving assignment of sorted references to sorted levels that
/// leaves the fewest references unmatched, then minimizes the largest
/// deviation. Returns the level index per reference, or -1.
inline std::vector<int> match_levels(const std::vector<double>& refs, const std::vector<double>& levels) {
  const std::size_t R = refs.size();
  const std::size_t L = levels.size();
  std::vector<std::size_t> ri(R), li(L);
  for (std::size_t i = 0; i < R; ++i) ri[i] = i;
  for (std::size_t j = 0; j < L; ++j) li[j] = j;
  std::sort(ri.begin(), ri.end(), [&](auto a, auto b) { return refs[a] < refs[b]; });
  std::sort(li.begin(), li.end(), [&](auto a, auto b) { return levels[a] < levels[b]; });

  using Cost = std::pair<int, double>;
  const Cost inf{std::numeric_limits<int>::max(), 0.0};
  std::vector<std::vector<Cost>> best(R + 1, std::vector<Cost>(L + 1, inf));
  std::vector<std::vector<int>> move(R + 1, std::vector<int>(L + 1, -1));
  best[0][0] = {0, 0.0};
  for (std::size_t i = 0; i <= R; ++i) {
    for (std::size_t j = 0; j <= L; ++j) {
      if (best[i][j] == inf) continue;
      const Cost here = best[i][j];
      auto relax = [&](std::size_t a, std::size_t b, Cost c, int kind) {
        if (c < best[a][b]) {
          best[a][b] = c;
          move[a][b] = kind;
        }
      };
      if (j < L) relax(i, j + 1, here, 0);
      if (i < R) relax(i + 1, j, {here.first + 1, here.second}, 1);
      if (i < R && j < L) {
        relax(i + 1, j + 1, {here.first, std::max(here.second, std::abs(refs[ri[i]] - levels[li[j]]))}, 2);
      }
    }
  }
  std::vector<int> out(R, -1);
  std::size_t i = R, j = L;
  while (i > 0 || j > 0) {
    const int kind = move[i][j];
    if (kind == 2) out[ri[i - 1]] = static_cast<int>(li[j - 1]);
    if (kind != 0) --i;
    if (kind != 1) --j;
  }
  return out;
}

inline void run_capacity_table(const json& spec, const TableOptions& opts, TableReport& report) {
  const int n = opts.n.value_or(spec.at("n").get<int>());
  for (const auto& c : spec.at("cases")) {
    TableRow row;
    row.label = c.at("case").get<std::string>();
    row.reference = c.at("cap").get<double>();
    report.rows.push_back(row);
  }
  for (std::size_t k = 0; k < report.rows.size(); ++k) {
    const json& c = spec.at("cases")[k];
    json cfg{{"command", "capacity"},
             {"constellation", {{"units", c.at("units")}, {"ring", c.at("ring")}}},
             {"solver", {{"n", n}}}};
    TableRow& row = report.rows[k];
    row.computed = run_capacity(parse_config(cfg)).outputs.at("cap").get<double>();
    row.deviation = std::abs(row.computed - row.reference);
    row.converged = true;
    row.pass = row.deviation <= report.tolerance;
  }
}

inline void run_maximize_table(const json& spec, const TableOptions& opts, TableReport& report) {
  const ConstraintSpec constraint = parse_constraint(Section(spec.at("constraint"), "constraint"));
  const double dedup = spec.at("dedup_tol").get<double>();
  const bool cyclic = constraint.kind == ConstraintKind::DiskCenters;
  std::vector<std::size_t> first_row;
  for (const auto& prob : spec.at("problems")) {
    first_row.push_back(report.rows.size());
    for (const auto& c : prob.at("cases")) {
      TableRow row;
      row.label = c.at("case").get<std::string>();
      row.reference = c.at("cap").get<double>();
      row.note = "not run";
      report.rows.push_back(row);
    }
  }
  for (std::size_t p = 0; p < spec.at("problems").size(); ++p) {
    const json& prob = spec.at("problems")[p];
    OptimizationProblem problem;
    problem.radii = prob.at("radii").get<std::vector<double>>();
    problem.constraint = constraint;
    if (opts.n) problem.n_polish = *opts.n;
    const int starts = opts.starts.value_or(prob.at("starts").get<int>());
    const std::vector<OptimizationResult> levels = multistart(problem, starts, opts.seed.value_or(1), {}, dedup);

    std::vector<double> refs, caps;
    for (const auto& c : prob.at("cases")) refs.push_back(c.at("cap").get<double>());
    for (const auto& l : levels) caps.push_back(l.cap);
    const std::vector<int> match = match_levels(refs, caps);
    std::vector<bool> used(levels.size(), false);
    for (std::size_t k = 0; k < refs.size(); ++k) {
      TableRow& row = report.rows[first_row[p] + k];
      row.note.clear();
      if (match[k] < 0) {
        row.note = "no matching local maximum found";
        continue;
      }
      const OptimizationResult& l = levels[match[k]];
      used[match[k]] = true;
      row.computed = l.cap;
      row.deviation = std::abs(l.cap - row.reference);
      row.distances = neighbour_distances(l.centers, constraint.kind);
      row.pattern_deviation =
          pattern_deviation(row.distances, prob.at("cases")[k].at("distances").get<std::vector<double>>(), cyclic);
      row.converged = l.converged;
      if (!l.converged) row.note = "local solver did not converge";
      row.pass = row.deviation <= report.tolerance && row.pattern_deviation <= report.pattern_tolerance;
    }
    for (std::size_t j = 0; j < levels.size(); ++j) {
      if (!used[j]) report.unmatched.push_back(levels[j].cap);
    }
  }
}

}  // namespace detail

inline json load_table_spec(int id, const std::string& data_dir) {
  if (id < 1 || id > 7) throw ConfigError("table: id must be between 1 and 7");
  const std::filesystem::path path = std::filesystem::path(data_dir) / ("table" + std::to_string(id) + ".json");
  return read_json_file(path.string());
}

/// Runs the experiment behind reference table `id` and compares with the
/// stored values. A failing sub-run stops the table; the rows not reached
/// keep pass = false.
inline TableReport run_table(int id, const TableOptions& opts = {}) {
  const json spec = load_table_spec(id, opts.data_dir);
  TableReport report;
  report.id = id;
  report.description = spec.at("description").get<std::string>();
  report.tolerance = spec.at("tolerance").get<double>();
  report.pattern_tolerance = spec.value("pattern_tolerance", 0.0);
  try {
    if (spec.at("kind").get<std::string>() == "capacity") {
      detail::run_capacity_table(spec, opts, report);
    } else {
      detail::run_maximize_table(spec, opts, report);
    }
  } catch (const std::exception& e) {
    report.error = e.what();
  }
  report.passed = report.error.empty() && !report.rows.empty() &&
                  std::all_of(report.rows.begin(), report.rows.end(), [](const auto& r) { return r.pass; });
  return report;
}

/// Side-by-side text view of a report.
inline std::string format_table(const TableReport& t) {
  std::ostringstream os;
  os << "table " << t.id << ": " << t.description << "\n";
  os << std::left << std::setw(6) << "case" << std::right << std::setw(20) << "reference" << std::setw(20)
     << "computed" << std::setw(11) << "|dev|" << std::setw(11) << "pattern" << "  status\n";
  for (const auto& r : t.rows) {
    char ref[32], comp[32], dev[32], pat[32];
    std::snprintf(ref, sizeof ref, "%.15g", r.reference);
    std::snprintf(comp, sizeof comp, "%.15g", r.computed);
    std::snprintf(dev, sizeof dev, "%.2e", r.deviation);
    std::snprintf(pat, sizeof pat, "%.2e", r.pattern_deviation);
    os << std::left << std::setw(6) << r.label << std::right << std::setw(20) << ref << std::setw(20) << comp
       << std::setw(11) << dev << std::setw(11) << (std::isnan(r.pattern_deviation) ? "-" : pat) << "  "
       << (r.pass ? "ok" : "FAIL");
    if (!r.note.empty()) os << "  (" << r.note << ")";
    os << "\n";
  }
  if (!t.unmatched.empty()) {
    os << "other levels:";
    for (const double c : t.unmatched) os << " " << format_number(c);
    os << "\n";
  }
  if (!t.error.empty()) os << "error: " << t.error << "\n";
  os << (t.passed ? "PASS" : "FAIL") << "\n";
  return os.str();
}

}  // namespace hypcap::cli
