#ifndef DISCROT_TOOLS_CLI_HPP
#define DISCROT_TOOLS_CLI_HPP

// Command-line front end. `run_cli` is the whole program minus `main`, so the
// test suite can drive it in-process.
//
// Config resolution: built-in defaults, then the JSON file given by --config,
// then explicit flags. Every output starts with the resolved config.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "discrot/discrot.hpp"

namespace discrot::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalError = 3, kRegimeError = 4 };

/// Raised for malformed flags, config files and specs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- formatting

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError("cannot parse " + what + ": '" + s + "'");
  return v;
}

inline long long parse_integer(const std::string& s, const std::string& what) {
  long long v = 0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError("cannot parse " + what + ": '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

// ---------------------------------------------------------------- config keys

enum class KeyType { Real, Integer, Text, Bool };

struct Key {
  std::string name;  // JSON key; the flag is --name with '_' replaced by '-'
  KeyType type;
  Json fallback;
  std::string help;
};

inline std::vector<Key> shared_keys() {
  return {
      {"beta", KeyType::Real, 3.0, "inverse temperature"},
      {"q", KeyType::Integer, 10, "number of arcs"},
      {"nodes_per_arc", KeyType::Integer, 32, "Gauss-Legendre nodes per arc panel"},
      {"seed", KeyType::Integer, 0, "RNG seed"},
      {"out", KeyType::Text, "-", "output path ('-' for stdout)"},
      {"format", KeyType::Text, "csv", "output format: csv or json"},
      {"ode_rtol", KeyType::Real, 1e-9, "ODE relative tolerance"},
      {"ode_atol", KeyType::Real, 1e-9, "ODE absolute tolerance"},
  };
}

inline std::map<std::string, std::vector<Key>> command_keys() {
  return {
      {"flow",
       {{"nu0", KeyType::Text, "eq", "initial profile spec"},
        {"t_final", KeyType::Real, 10.0, "final time"},
        {"output_dt", KeyType::Real, 0.1, "output spacing"}}},
      {"orbit",
       {{"samples", KeyType::Integer, 0, "orbit samples (0 selects 64 q)"},
        {"nu", KeyType::Text, "", "if set, report the orbit distance of this profile instead"}}},
      {"spectrum", {{"match_tol", KeyType::Real, 1e-8, "analytic/numeric match tolerance"}}},
      {"regimes",
       {{"beta_min", KeyType::Real, 2.0, "lower beta bound (exclusive, >= 2)"},
        {"beta_max", KeyType::Real, 100.0, "upper beta bound"},
        {"beta_steps", KeyType::Integer, 98, "beta grid points"},
        {"q_min", KeyType::Integer, 3, "smallest q"},
        {"q_max", KeyType::Integer, 100, "largest q"}}},
      {"lyapunov",
       {{"from", KeyType::Text, "eq", "segment start profile spec"},
        {"to", KeyType::Text, "orbit:0", "segment end profile spec"},
        {"s_min", KeyType::Real, 0.0, "smallest line parameter"},
        {"s_max", KeyType::Real, 1.0, "largest line parameter"},
        {"samples", KeyType::Integer, 101, "scan points"}}},
      {"simulate",
       {{"nu0", KeyType::Text, "eq", "initial profile spec"},
        {"N", KeyType::Integer, 1000, "number of particles"},
        {"t_final", KeyType::Real, 5.0, "final time"},
        {"subsample_dt", KeyType::Real, 0.0, "record on this time grid (0 records every event)"},
        {"lazy", KeyType::Bool, false, "lazy magnetization re-solves"}}},
      {"lln",
       {{"nu0", KeyType::Text, "orbitmix:0:0.8", "initial profile spec"},
        {"N", KeyType::Text, "100,1000,10000", "comma-separated particle numbers"},
        {"seeds", KeyType::Integer, 20, "number of seeds, starting at --seed"},
        {"t_final", KeyType::Real, 5.0, "final time"},
        {"lazy", KeyType::Bool, false, "lazy magnetization re-solves"}}},
      {"lagrangian",
       {{"nu", KeyType::Text, "eq", "profile spec"},
        {"u", KeyType::Text, "flow-velocity", "velocity spec"}}},
      {"checkerboard", {}},
  };
}

inline std::string flag_of(const std::string& key) {
  std::string f = key;
  for (char& ch : f)
    if (ch == '_') ch = '-';
  return "--" + f;
}

inline Json coerce(const Key& key, const Json& v, const std::string& origin) {
  const auto bad = [&] { return ConfigError(origin + ": '" + key.name + "' has the wrong type"); };
  switch (key.type) {
    case KeyType::Real:
      if (!v.is_number()) throw bad();
      return v.get<double>();
    case KeyType::Integer:
      if (v.is_number_integer()) return v;
      if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())
        return static_cast<long long>(v.get<double>());
      throw bad();
    case KeyType::Text:
      // A bare integer is accepted where a list spec is expected (e.g. "N": 1000).
      if (v.is_number_integer()) return std::to_string(v.get<long long>());
      if (!v.is_string()) throw bad();
      return v;
    case KeyType::Bool:
      if (!v.is_boolean()) throw bad();
      return v;
  }
  throw bad();
}

inline Json parse_flag(const Key& key, const std::string& raw) {
  switch (key.type) {
    case KeyType::Real:
      return parse_double(raw, flag_of(key.name));
    case KeyType::Integer:
      return parse_integer(raw, flag_of(key.name));
    case KeyType::Text:
      return raw;
    case KeyType::Bool:
      if (raw == "true" || raw == "1") return true;
      if (raw == "false" || raw == "0") return false;
      throw ConfigError("cannot parse " + flag_of(key.name) + ": '" + raw + "'");
  }
  return raw;
}

// ---------------------------------------------------------------- run config

struct RunConfig {
  std::string command;
  Json values;  // resolved, ordered: shared keys first

  double real(const std::string& k) const { return values.at(k).get<double>(); }
  long long integer(const std::string& k) const { return values.at(k).get<long long>(); }
  std::string text(const std::string& k) const { return values.at(k).get<std::string>(); }
  bool flag(const std::string& k) const { return values.at(k).get<bool>(); }

  Json header() const {
    Json h;
    h["command"] = command;
    for (const auto& [k, v] : values.items()) h[k] = v;
    return h;
  }

  ModelParams params() const {
    ModelParams p;
    p.beta = real("beta");
    p.q = static_cast<int>(integer("q"));
    p.nodes_per_arc = static_cast<int>(integer("nodes_per_arc"));
    return p;
  }
  FlowOptions flow() const {
    FlowOptions f;
    f.rtol = real("ode_rtol");
    f.atol = real("ode_atol");
    return f;
  }
};

inline void validate(const RunConfig& cfg) {
  if (cfg.integer("q") < 3) throw ConfigError("q must be at least 3");
  if (cfg.integer("nodes_per_arc") < 8) throw ConfigError("nodes_per_arc must be at least 8");
  if (!(cfg.real("beta") > 0.0) || !std::isfinite(cfg.real("beta")))
    throw ConfigError("beta must be positive and finite");
  for (const char* k : {"ode_rtol", "ode_atol"})
    if (!(cfg.real(k) > 0.0)) throw ConfigError(std::string(k) + " must be positive");
  if (cfg.integer("seed") < 0) throw ConfigError("seed must be nonnegative");
  const std::string fmt = cfg.text("format");
  if (fmt != "csv" && fmt != "json") throw ConfigError("format must be csv or json");
}

// ---------------------------------------------------------------- specs

/// Profile specs: eq | orbit:<theta> | dirac:<k> | mix:<w1,...,wq> |
/// file:<path> | orbitmix:<theta>:<lambda> (lambda orbit(theta) + (1-lambda) eq).
inline SimplexVector parse_profile(const std::string& spec, const Model& model) {
  const int q = model.q();
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  const auto weights_from = [&](const std::vector<std::string>& items) {
    std::vector<double> w;
    for (const auto& it : items)
      if (!it.empty()) w.push_back(parse_double(it, "profile weight"));
    if (static_cast<int>(w.size()) != q)
      throw ConfigError("profile needs " + std::to_string(q) + " weights, got " + std::to_string(w.size()));
    for (double v : w)
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("profile weights must be nonnegative");
    try {
      return SimplexVector::normalized(std::move(w));
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  };
  if (head == "eq" && colon == std::string::npos) return SimplexVector::uniform(q);
  if (head == "orbit") return GibbsOrbit(model).point(parse_double(rest, "orbit angle")).nu;
  if (head == "dirac") {
    const long long k = parse_integer(rest, "dirac arc");
    if (k < 1 || k > q) throw ConfigError("dirac arc out of range");
    return SimplexVector::dirac(q, static_cast<int>(k));
  }
  if (head == "mix") return weights_from(split(rest, ','));
  if (head == "orbitmix") {
    const auto parts = split(rest, ':');
    if (parts.size() != 2) throw ConfigError("orbitmix needs <theta>:<lambda>");
    const double lambda = parse_double(parts[1], "orbitmix weight");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("orbitmix weight must lie in [0, 1]");
    const auto orb = GibbsOrbit(model).point(parse_double(parts[0], "orbit angle")).nu;
    return mix(SimplexVector::uniform(q), orb, lambda);
  }
  if (head == "file") {
    std::ifstream in(rest);
    if (!in) throw ConfigError("cannot open profile file '" + rest + "'");
    std::vector<std::string> items;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] == '#') continue;
      for (char& ch : line)
        if (ch == ',' || ch == '\t' || ch == '\r') ch = ' ';
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) items.push_back(tok);
    }
    return weights_from(items);
  }
  throw ConfigError("unknown profile spec '" + spec + "'");
}

/// Velocity specs: flow-velocity | zero | mode:<j>:<amp> | flow+mode:<j>:<amp> |
/// vec:<u1,...,uq>. mode:<j>:<amp> is amp cos(2 pi j k / q).
inline std::vector<double> parse_velocity(const std::string& spec, const Model& model,
                                          const SimplexVector& nu) {
  const int q = model.q();
  const auto mode = [&](const std::string& rest) {
    const auto parts = split(rest, ':');
    if (parts.size() != 2) throw ConfigError("mode needs <j>:<amplitude>");
    const long long j = parse_integer(parts[0], "mode index");
    if (j % q == 0) throw ConfigError("mode index must not be a multiple of q");
    const double amp = parse_double(parts[1], "mode amplitude");
    std::vector<double> u(static_cast<std::size_t>(q));
    for (int k = 1; k <= q; ++k) u[k - 1] = amp * std::cos(kTwoPi * static_cast<double>(j) * k / q);
    double mean = 0.0;
    for (double v : u) mean += v / q;
    for (double& v : u) v -= mean;
    return u;
  };
  if (spec == "flow-velocity") return vector_field(model, nu);
  if (spec == "zero") return std::vector<double>(static_cast<std::size_t>(q), 0.0);
  if (spec.rfind("mode:", 0) == 0) return mode(spec.substr(5));
  if (spec.rfind("flow+mode:", 0) == 0) {
    auto u = vector_field(model, nu);
    const auto d = mode(spec.substr(10));
    for (int k = 0; k < q; ++k) u[k] += d[k];
    return u;
  }
  if (spec.rfind("vec:", 0) == 0) {
    std::vector<double> u;
    for (const auto& it : split(spec.substr(4), ',')) u.push_back(parse_double(it, "velocity entry"));
    if (static_cast<int>(u.size()) != q) throw ConfigError("velocity needs q entries");
    return u;
  }
  throw ConfigError("unknown velocity spec '" + spec + "'");
}

// ---------------------------------------------------------------- tables

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  Json summary = Json::object();
};

inline Json cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    if (std::isfinite(*d)) return *d;
    return std::isnan(*d) ? "nan" : (*d > 0 ? "inf" : "-inf");
  }
  if (const auto* i = std::get_if<long long>(&c)) return *i;
  return std::get<std::string>(c);
}

inline std::string cell_csv(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

inline void write_table(std::ostream& os, const RunConfig& cfg, const Table& t) {
  if (cfg.text("format") == "json") {
    Json doc;
    doc["config"] = cfg.header();
    if (!t.summary.empty()) doc["summary"] = t.summary;
    doc["columns"] = t.columns;
    Json rows = Json::array();
    for (const auto& r : t.rows) {
      Json obj;
      for (std::size_t i = 0; i < r.size(); ++i) obj[t.columns[i]] = cell_json(r[i]);
      rows.push_back(std::move(obj));
    }
    doc["rows"] = std::move(rows);
    os << doc.dump(2) << '\n';
    return;
  }
  os << "# config: " << cfg.header().dump() << '\n';
  if (!t.summary.empty()) os << "# summary: " << t.summary.dump() << '\n';
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << cell_csv(r[i]);
    os << '\n';
  }
}

// ---------------------------------------------------------------- commands

struct CommandResult {
  Table table;
  int exit_code = kOk;
  std::string failure;  // message for a nonzero exit_code
};

inline std::vector<std::string> arc_columns(const std::string& prefix, int q) {
  std::vector<std::string> c;
  for (int k = 1; k <= q; ++k) c.push_back(prefix + std::to_string(k));
  return c;
}

inline CommandResult cmd_flow(const RunConfig& cfg, const Model& model) {
  const auto nu0 = parse_profile(cfg.text("nu0"), model);
  const double t_final = cfg.real("t_final"), dt = cfg.real("output_dt");
  if (!(t_final > 0.0) || !(dt > 0.0)) throw ConfigError("t_final and output_dt must be positive");
  const auto traj = integrate_flow(model, nu0, t_final, dt, cfg.flow());
  CommandResult res;
  auto& t = res.table;
  t.columns = {"t"};
  for (auto& c : arc_columns("w", model.q())) t.columns.push_back(c);
  t.columns.insert(t.columns.end(), {"Mx", "My"});
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    std::vector<Cell> row{traj.times[i]};
    for (double w : traj.states[i].weights()) row.emplace_back(w);
    row.emplace_back(traj.magnetizations[i].x);
    row.emplace_back(traj.magnetizations[i].y);
    t.rows.push_back(std::move(row));
  }
  return res;
}

inline CommandResult cmd_orbit(const RunConfig& cfg, const Model& model) {
  const GibbsOrbit orbit(model);
  long long samples = cfg.integer("samples");
  if (samples == 0) samples = orbit.default_samples();
  if (samples < model.q()) throw ConfigError("samples must be at least q");
  CommandResult res;
  auto& t = res.table;
  t.summary["mstar"] = orbit.mstar();
  t.summary["psi_offset"] = orbit.psi_offset();
  const std::string nu_spec = cfg.text("nu");
  if (!nu_spec.empty()) {
    const auto nu = parse_profile(nu_spec, model);
    t.columns = {"orbit_distance", "psi"};
    t.rows.push_back({orbit.distance(nu, static_cast<int>(samples)), free_energy(model, nu).value});
    return res;
  }
  t.columns = {"theta"};
  for (auto& c : arc_columns("w", model.q())) t.columns.push_back(c);
  t.columns.insert(t.columns.end(), {"Mx", "My", "psi"});
  for (long long j = 0; j < samples; ++j) {
    const auto p = orbit.point(kTwoPi * static_cast<double>(j) / static_cast<double>(samples));
    std::vector<Cell> row{p.theta};
    for (double w : p.nu.weights()) row.emplace_back(w);
    row.emplace_back(p.m.x);
    row.emplace_back(p.m.y);
    row.emplace_back(free_energy(model, p.nu, p.m).value);
    t.rows.push_back(std::move(row));
  }
  return res;
}

inline CommandResult cmd_spectrum(const RunConfig& cfg, const Model& model) {
  const auto analytic = eq_eigenvalues(model);
  const auto numeric = numeric_eigenvalues(eq_matrix(model).entries);
  const auto match = match_spectra(analytic.eigenvalues, numeric);
  CommandResult res;
  auto& t = res.table;
  t.columns = {"j", "re", "im", "source"};
  int positive = 0;
  for (std::size_t j = 0; j < analytic.eigenvalues.size(); ++j) {
    const auto z = analytic.eigenvalues[j];
    positive += z.real() > 0.0;
    t.rows.push_back({static_cast<long long>(j + 1), z.real(), z.imag(), std::string("analytic")});
  }
  for (std::size_t j = 0; j < analytic.eigenvalues.size(); ++j) {
    const auto z = numeric[static_cast<std::size_t>(match.numeric_index[j])];
    t.rows.push_back({static_cast<long long>(j + 1), z.real(), z.imag(), std::string("numeric")});
  }
  t.summary["c1"] = analytic.c1;
  t.summary["c2"] = analytic.c2;
  t.summary["max_mismatch"] = match.max_mismatch;
  t.summary["positive_real_part"] = positive;
  if (!(match.max_mismatch <= cfg.real("match_tol"))) {
    res.exit_code = kNumericalError;
    res.failure = "analytic and numeric spectra differ by " + format_double(match.max_mismatch);
  }
  return res;
}

inline CommandResult cmd_regimes(const RunConfig& cfg, const Model&) {
  const auto cells = regime_grid(cfg.real("beta_min"), cfg.real("beta_max"),
                                 static_cast<int>(cfg.integer("beta_steps")),
                                 static_cast<int>(cfg.integer("q_min")),
                                 static_cast<int>(cfg.integer("q_max")));
  CommandResult res;
  auto& t = res.table;
  t.columns = {"beta", "q", "uniqueness", "non_uniqueness", "eq_attractive", "regime"};
  long long violations = 0;
  for (const auto& c : cells) {
    violations += c.label.equidistribution_attractive && !c.label.non_uniqueness;
    t.rows.push_back({c.beta, static_cast<long long>(c.q), static_cast<long long>(c.label.uniqueness),
                      static_cast<long long>(c.label.non_uniqueness),
                      static_cast<long long>(c.label.equidistribution_attractive),
                      std::string(to_string(c.label.regime))});
  }
  t.summary["implication_violations"] = violations;
  return res;
}

inline CommandResult cmd_lyapunov(const RunConfig& cfg, const Model& model) {
  const auto from = parse_profile(cfg.text("from"), model);
  const auto to = parse_profile(cfg.text("to"), model);
  const long long samples = cfg.integer("samples");
  if (samples < 2) throw ConfigError("samples must be at least 2");
  const auto scan = lyapunov_scan(model, from, to, cfg.real("s_min"), cfg.real("s_max"),
                                  static_cast<int>(samples));
  CommandResult res;
  auto& t = res.table;
  t.columns = {"s", "psi", "dpsi_dt"};
  for (const auto& s : scan) t.rows.push_back({s.s, s.psi, s.rate.as_double()});
  return res;
}

inline SimulationOptions simulation_options(const RunConfig& cfg) {
  SimulationOptions o;
  o.lazy = cfg.flag("lazy");
  return o;
}

inline CommandResult cmd_simulate(const RunConfig& cfg, const Model& model) {
  const auto nu0 = parse_profile(cfg.text("nu0"), model);
  const long long n = cfg.integer("N");
  const double t_final = cfg.real("t_final"), sub = cfg.real("subsample_dt");
  if (n < 1) throw ConfigError("N must be at least 1");
  if (!(t_final > 0.0) || !(sub >= 0.0)) throw ConfigError("t_final must be positive, subsample_dt nonnegative");
  CommandResult res;
  auto& t = res.table;
  t.columns = {"t"};
  for (auto& c : arc_columns("c", model.q())) t.columns.push_back(c);
  const auto push = [&](double time, const OccupationState& s) {
    std::vector<Cell> row{time};
    for (long c : s.counts) row.emplace_back(static_cast<long long>(c));
    t.rows.push_back(std::move(row));
  };
  long long next = 0;  // index of the next subsampling time
  OccupationState last;
  const long jumps = simulate(
      model, round_to_counts(nu0, n), t_final, static_cast<std::uint64_t>(cfg.integer("seed")),
      [&](double time, const OccupationState& s) {
        if (sub == 0.0) {
          push(time, s);
          return;
        }
        while (static_cast<double>(next) * sub < time) {
          push(static_cast<double>(next) * sub, last);
          ++next;
        }
        last = s;
      },
      simulation_options(cfg));
  if (sub > 0.0)
    for (; static_cast<double>(next) * sub <= t_final * (1.0 + 1e-12); ++next)
      push(static_cast<double>(next) * sub, last);
  t.summary["jumps"] = jumps;
  return res;
}

inline CommandResult cmd_lln(const RunConfig& cfg, const Model& model) {
  const auto nu0 = parse_profile(cfg.text("nu0"), model);
  std::vector<long> ns;
  for (const auto& item : split(cfg.text("N"), ',')) {
    const long long v = parse_integer(item, "N list entry");
    if (v < 1) throw ConfigError("N list entries must be positive");
    ns.push_back(static_cast<long>(v));
  }
  const long long count = cfg.integer("seeds");
  if (count < 1) throw ConfigError("seeds must be positive");
  const double t_final = cfg.real("t_final");
  if (!(t_final > 0.0)) throw ConfigError("t_final must be positive");
  std::vector<std::uint64_t> seeds;
  for (long long i = 0; i < count; ++i) seeds.push_back(static_cast<std::uint64_t>(cfg.integer("seed") + i));
  const auto rows = lln_error(model, nu0, ns, t_final, seeds, simulation_options(cfg));
  CommandResult res;
  auto& t = res.table;
  t.columns = {"N", "seed", "sup_tv"};
  std::map<long, std::vector<double>> by_n;
  for (const auto& r : rows) {
    t.rows.push_back({static_cast<long long>(r.n), static_cast<long long>(r.seed), r.sup_tv});
    by_n[r.n].push_back(r.sup_tv);
  }
  Json medians = Json::object();
  for (const auto& [n, v] : by_n) medians[std::to_string(n)] = median(v);
  t.summary["median_sup_tv"] = medians;
  return res;
}

inline CommandResult cmd_lagrangian(const RunConfig& cfg, const Model& model) {
  const auto nu = parse_profile(cfg.text("nu"), model);
  const auto u = parse_velocity(cfg.text("u"), model, nu);
  const auto val = lagrangian(model, nu, u);
  CommandResult res;
  auto& t = res.table;
  t.columns = {"value", "converged", "iterations", "gradient_norm"};
  for (auto& c : arc_columns("p", model.q())) t.columns.push_back(c);
  std::vector<Cell> row{val.value, static_cast<long long>(val.converged),
                        static_cast<long long>(val.iterations), val.gradient_norm};
  for (double p : val.maximizer.vector()) row.emplace_back(p);
  t.rows.push_back(std::move(row));
  return res;
}

inline CommandResult cmd_checkerboard(const RunConfig&, const Model& model) {
  if (model.q() % 2 != 0) throw ConfigError("checkerboard needs an even q");
  const auto roots = checkerboard_fixed_points(model);
  CommandResult res;
  auto& t = res.table;
  t.columns = {"quantity", "value"};
  t.rows.push_back({std::string("slope_at_zero"), CheckerboardMap(model.q(), model.params().nodes_per_arc).derivative_at_zero()});
  t.rows.push_back({std::string("slope_formula"), checkerboard_slope_at_zero(model.q())});
  t.rows.push_back({std::string("non_uniqueness_indicator"), non_uniqueness_indicator(model.beta(), model.q())});
  for (double r : roots) t.rows.push_back({std::string("root"), r});
  t.summary["nontrivial_roots"] = static_cast<long long>(roots.size()) - 1;
  return res;
}

using Command = CommandResult (*)(const RunConfig&, const Model&);

inline const std::map<std::string, std::pair<Command, std::string>>& commands() {
  static const std::map<std::string, std::pair<Command, std::string>> table{
      {"flow", {cmd_flow, "integrate the limiting flow"}},
      {"orbit", {cmd_orbit, "sample the discretized Gibbs orbit"}},
      {"spectrum", {cmd_spectrum, "Jacobian spectrum at the equidistribution"}},
      {"regimes", {cmd_regimes, "(beta, q) regime grid"}},
      {"lyapunov", {cmd_lyapunov, "free energy and its rate along a segment"}},
      {"simulate", {cmd_simulate, "finite-N jump process path"}},
      {"lln", {cmd_lln, "sup-TV distance between jump process and flow"}},
      {"lagrangian", {cmd_lagrangian, "path large-deviation Lagrangian"}},
      {"checkerboard", {cmd_checkerboard, "checkerboard fixed points"}},
  };
  return table;
}

// ---------------------------------------------------------------- driver

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput:
      return kConfigError;
    case ErrorKind::Regime:
      return kRegimeError;
    default:
      return kNumericalError;
  }
}

inline void report_error(std::ostream& err, int code, const std::string& kind, const std::string& module,
                         const std::string& message) {
  Json rec;
  rec["error"] = {{"kind", kind}, {"module", module}, {"message", message}, {"exit_code", code}};
  err << rec.dump() << '\n';
}

/// Resolves defaults < config file < flags for `command`.
inline RunConfig resolve_config(const std::string& command, const std::map<std::string, std::string>& flags,
                                const std::string& config_path) {
  const auto all = command_keys();
  std::vector<Key> keys = shared_keys();
  for (const auto& k : all.at(command)) keys.push_back(k);

  Json file = Json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
    try {
      file = Json::parse(in);
    } catch (const Json::exception& e) {
      throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
    }
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    // Keys of other subcommands are tolerated so one file can serve several.
    for (const auto& [k, v] : file.items()) {
      bool known = false;
      for (const auto& sk : shared_keys()) known = known || sk.name == k;
      for (const auto& [cmd, ks] : all)
        for (const auto& sk : ks) known = known || sk.name == k;
      if (!known) throw ConfigError("unknown config key '" + k + "'");
    }
  }

  RunConfig cfg;
  cfg.command = command;
  for (const auto& key : keys) {
    Json v = key.fallback;
    if (file.contains(key.name)) v = coerce(key, file.at(key.name), "config file");
    if (const auto it = flags.find(key.name); it != flags.end()) v = parse_flag(key, it->second);
    cfg.values[key.name] = v;
  }
  validate(cfg);
  return cfg;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete mean-field rotator dynamics"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  const auto all = command_keys();
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, std::string> config_path;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands()) {
    CLI::App* sub = app.add_subcommand(name, entry.second);
    subs[name] = sub;
    sub->add_option("--config", config_path[name], "JSON config file");
    std::vector<Key> keys = shared_keys();
    for (const auto& k : all.at(name)) keys.push_back(k);
    for (const auto& k : keys) {
      if (k.type == KeyType::Bool) {
        sub->add_flag(flag_of(k.name) + "{true}", raw[name][k.name], k.help);
      } else {
        sub->add_option(flag_of(k.name), raw[name][k.name], k.help);
      }
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, kConfigError, "config", "cli", e.what());
    return kConfigError;
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  std::map<std::string, std::string> flags;
  {
    std::vector<Key> keys = shared_keys();
    for (const auto& k : all.at(command)) keys.push_back(k);
    for (const auto& k : keys)
      if (subs[command]->count(flag_of(k.name)) > 0) flags[k.name] = raw[command][k.name];
  }

  try {
    const RunConfig cfg = resolve_config(command, flags, config_path[command]);
    const Model model(cfg.params());
    CommandResult res = commands().at(command).first(cfg, model);

    const std::string path = cfg.text("out");
    if (path == "-") {
      write_table(out, cfg, res.table);
    } else {
      std::ofstream file(path, std::ios::binary);
      if (!file) throw ConfigError("cannot open output file '" + path + "'");
      write_table(file, cfg, res.table);
      if (!file) throw ConfigError("failed writing output file '" + path + "'");
    }
    if (res.exit_code != kOk) report_error(err, res.exit_code, "check", command, res.failure);
    return res.exit_code;
  } catch (const ConfigError& e) {
    report_error(err, kConfigError, "config", "cli", e.what());
    return kConfigError;
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    report_error(err, code, to_string(e.kind()), e.module(), e.what());
    return code;
  }
}

}  // namespace discrot::cli

#endif  // DISCROT_TOOLS_CLI_HPP
