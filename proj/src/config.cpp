#include "jdfilter/config.hpp"

#include "jdfilter/csv.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace jdfilter {

namespace {

using KeyMap = std::map<std::string, std::string>;

struct Sections {
  KeyMap model, run, output;
};

Sections parse_sections(const std::string& text) {
  Sections s;
  KeyMap* current = nullptr;
  std::istringstream in(text);
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    std::string t = trim(line);
    const auto hash = t.find('#');
    if (hash != std::string::npos) t = trim(t.substr(0, hash));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(ln) + ": malformed section");
      const std::string name = trim(t.substr(1, t.size() - 2));
      if (name == "model")
        current = &s.model;
      else if (name == "run")
        current = &s.run;
      else if (name == "output")
        current = &s.output;
      else
        throw ConfigError("line " + std::to_string(ln) + ": unknown section [" + name + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos || current == nullptr)
      throw ConfigError("line " + std::to_string(ln) + ": expected 'key = value' inside a section");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(ln) + ": empty key");
    if (!current->emplace(key, value).second)
      throw ConfigError("line " + std::to_string(ln) + ": duplicate key '" + key + "'");
  }
  return s;
}

class SectionReader {
 public:
  SectionReader(const KeyMap& map, std::string prefix) : map_(map), prefix_(std::move(prefix)) {}

  bool has(const std::string& key) const { return map_.count(key) > 0; }

  std::string require(const std::string& key) const {
    const auto it = map_.find(key);
    if (it == map_.end()) throw ConfigError(prefix_ + "." + key + ": missing");
    return it->second;
  }

  std::string get(const std::string& key, const std::string& fallback) const {
    const auto it = map_.find(key);
    return it == map_.end() ? fallback : it->second;
  }

  double number(const std::string& key) const { return to_number(key, require(key)); }

  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const auto& cell : split(require(key), ','))
      out.push_back(to_number(key, trim(cell)));
    return out;
  }

  std::vector<std::string> names(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& cell : split(require(key), ',')) {
      const std::string n = trim(cell);
      if (!n.empty()) out.push_back(n);
    }
    return out;
  }

  std::vector<std::uint64_t> seeds(const std::string& key) const {
    try {
      return parse_seed_list(require(key));
    } catch (const ConfigError& e) {
      throw ConfigError(prefix_ + "." + key + ": " + e.what());
    }
  }

  // Coefficient value: a plain number (constant) or `affine:c0,cx,cy`.
  Affine coefficient(const std::string& key, Affine fallback) const {
    if (!has(key)) return fallback;
    const std::string v = require(key);
    Affine a;
    if (v.rfind("affine:", 0) == 0) {
      const auto parts = split(v.substr(7), ',');
      if (parts.size() != 3)
        throw ConfigError(prefix_ + "." + key + ": affine form needs 'affine:c0,cx,cy'");
      a.c0 = to_number(key, trim(parts[0]));
      a.cx = to_number(key, trim(parts[1]));
      a.cy = to_number(key, trim(parts[2]));
    } else {
      a.c0 = to_number(key, v);
    }
    return a;
  }

 private:
  double to_number(const std::string& key, const std::string& text) const {
    try {
      std::size_t pos = 0;
      const double v = std::stod(text, &pos);
      if (pos != text.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(prefix_ + "." + key + ": cannot parse number '" + text + "'");
    }
  }

  const KeyMap& map_;
  std::string prefix_;
};

FiniteStateSignalModel build_finite_model(const SectionReader& m) {
  const auto state_labels = m.names("states");
  const int n = static_cast<int>(state_labels.size());
  if (n < 1) throw ConfigError("model.states: need at least one state");
  Eigen::VectorXd states(n);
  for (int u = 0; u < n; ++u) {
    try {
      states[u] = std::stod(state_labels[static_cast<std::size_t>(u)]);
    } catch (const std::exception&) {
      throw ConfigError("model.states: state labels must be numeric values");
    }
  }

  const auto lambda0_v = m.numbers("lambda0");
  if (static_cast<int>(lambda0_v.size()) != n)
    throw ConfigError("model.lambda0: need one rate per state");
  Eigen::VectorXd lambda0(n);
  for (int u = 0; u < n; ++u) lambda0[u] = lambda0_v[static_cast<std::size_t>(u)];

  Eigen::MatrixXd mu0 = Eigen::MatrixXd::Zero(n, n);
  for (int u = 0; u < n; ++u) {
    const std::string key = "mu_row_" + state_labels[static_cast<std::size_t>(u)];
    if (!m.has(key)) {
      if (lambda0[u] > 0.0) throw ConfigError("model." + key + ": missing");
      continue;
    }
    const auto row = m.numbers(key);
    if (static_cast<int>(row.size()) != n)
      throw ConfigError("model." + key + ": need one probability per state");
    for (int v = 0; v < n; ++v) mu0(u, v) = row[static_cast<std::size_t>(v)];
  }

  Eigen::MatrixXd obs_size = Eigen::MatrixXd::Zero(n, n);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      const std::string key = "obs_size_" + state_labels[static_cast<std::size_t>(u)] + "_" +
                              state_labels[static_cast<std::size_t>(v)];
      if (m.has(key)) obs_size(u, v) = m.number(key);
    }

  std::vector<ObservationOnlyMark> extra;
  if (m.has("marks")) {
    for (const auto& name : m.names("marks")) {
      ObservationOnlyMark mark;
      mark.name = name;
      const auto rates = m.numbers("mark_" + name + "_rates");
      if (static_cast<int>(rates.size()) != n)
        throw ConfigError("model.mark_" + name + "_rates: need one rate per state");
      mark.rates.resize(n);
      for (int u = 0; u < n; ++u) mark.rates[u] = rates[static_cast<std::size_t>(u)];
      mark.size = m.number("mark_" + name + "_size");
      extra.push_back(std::move(mark));
    }
  }

  const auto b1_v = m.numbers("b1");
  if (static_cast<int>(b1_v.size()) != n) throw ConfigError("model.b1: need one value per state");
  Eigen::VectorXd b1(n);
  for (int u = 0; u < n; ++u) b1[u] = b1_v[static_cast<std::size_t>(u)];

  const Affine sigma1 = m.coefficient("sigma1", Affine{1.0, 0.0, 0.0});
  if (sigma1.cx != 0.0) throw ConfigError("model.sigma1: must not depend on the signal");

  const std::string x0_label = m.require("x0");
  const auto it = std::find(state_labels.begin(), state_labels.end(), x0_label);
  if (it == state_labels.end()) throw ConfigError("model.x0: not a declared state");
  const int x0_index = static_cast<int>(it - state_labels.begin());

  Eigen::VectorXd prior;
  if (m.has("prior")) {
    const auto pv = m.numbers("prior");
    if (static_cast<int>(pv.size()) != n)
      throw ConfigError("model.prior: need one probability per state");
    prior.resize(n);
    for (int u = 0; u < n; ++u) prior[u] = pv[static_cast<std::size_t>(u)];
  }

  try {
    return FiniteStateSignalModel(states, state_labels, lambda0, mu0, obs_size, extra, b1, sigma1,
                                  m.number("rho", 0.0), x0_index, prior, m.number("y0", 0.0),
                                  m.number("horizon"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

JumpDiffusionSystem build_jump_diffusion(const SectionReader& m) {
  std::vector<Mark> marks;
  if (m.has("marks")) {
    for (const auto& name : m.names("marks")) {
      Mark mark;
      mark.name = name;
      mark.weight = m.number("mark_" + name + "_weight");
      mark.k0 = m.number("mark_" + name + "_k0", 0.0);
      mark.k1 = m.number("mark_" + name + "_k1", 0.0);
      const std::string gate_key = "mark_" + name + "_gate";
      if (m.has(gate_key)) {
        const auto g = m.numbers(gate_key);
        if (g.size() != 2) throw ConfigError("model." + gate_key + ": need 'lo,hi'");
        mark.gated = true;
        mark.gate_lo = g[0];
        mark.gate_hi = g[1];
      }
      marks.push_back(mark);
    }
  }
  try {
    return JumpDiffusionSystem(
        m.coefficient("b0", Affine{}), m.coefficient("sigma0", Affine{1.0, 0.0, 0.0}),
        m.coefficient("b1", Affine{}), m.coefficient("sigma1", Affine{1.0, 0.0, 0.0}),
        m.number("rho", 0.0), MarkSpace(std::move(marks)), m.number("x0", 0.0),
        m.number("y0", 0.0), m.number("horizon"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  const auto number = [](const std::string& cell) {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(cell, &pos);
      if (pos != cell.size()) throw std::invalid_argument("trailing characters");
      return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse seed '" + cell + "'");
    }
  };
  std::vector<std::uint64_t> out;
  for (const auto& cell : split(text, ',')) {
    const std::string n = trim(cell);
    if (n.empty()) continue;
    const auto dots = n.find("..");
    if (dots != std::string::npos) {
      const std::uint64_t lo = number(trim(n.substr(0, dots)));
      const std::uint64_t hi = number(trim(n.substr(dots + 2)));
      if (hi < lo) throw ConfigError("empty seed range '" + n + "'");
      for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(number(n));
    }
  }
  return out;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& overrides) {
  const Sections sections = parse_sections(text);
  const SectionReader model_r(sections.model, "model");
  const SectionReader run_r(sections.run, "run");
  const SectionReader out_r(sections.output, "output");

  ExperimentConfig cfg;
  cfg.family = model_r.require("family");

  if (cfg.family == "finite_state") {
    cfg.model = build_finite_model(model_r);
  } else if (cfg.family == "jump_diffusion") {
    cfg.model = build_jump_diffusion(model_r);
  } else {
    throw ConfigError("model.family: unknown family '" + cfg.family + "'");
  }

  cfg.run.dt = run_r.number("dt");
  if (!(cfg.run.dt > 0.0)) throw ConfigError("run.dt: must be > 0");
  cfg.run.seeds = run_r.seeds("seeds");
  if (cfg.run.seeds.empty()) throw ConfigError("run.seeds: must be nonempty");
  cfg.run.n_paths = static_cast<int>(run_r.number("n_paths", 1000));
  if (cfg.run.n_paths < 1) throw ConfigError("run.n_paths: must be >= 1");
  cfg.run.n_particles = static_cast<int>(run_r.number("n_particles", 1000));
  if (cfg.run.n_particles < 1) throw ConfigError("run.n_particles: must be >= 1");
  cfg.run.resample_threshold = run_r.number("resample_threshold", 0.5);
  if (!(cfg.run.resample_threshold > 0.0 && cfg.run.resample_threshold <= 1.0))
    throw ConfigError("run.resample_threshold: must lie in (0, 1]");

  cfg.output.dir = out_r.get("dir", "out");
  if (out_r.has("solvers")) cfg.output.solvers = out_r.names("solvers");
  for (const auto& s : cfg.output.solvers)
    if (s != "zakai" && s != "ks" && s != "grid_bayes" && s != "particle")
      throw ConfigError("output.solvers: unknown solver '" + s + "'");

  cfg.config_hash = fnv1a64(text + "\n--overrides--\n" + overrides);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::string& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), overrides);
}

}  // namespace jdfilter
