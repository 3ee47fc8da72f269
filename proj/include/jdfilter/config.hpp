#pragma once

// Experiment configuration: a sectioned key-value text file (`[model]`,
// `[run]`, `[output]`). Single source of truth for an experiment; the CLI
// only adds a subcommand and optional seed/dt/out overrides, and the file's
// fingerprint goes into every output manifest.

#include "jdfilter/model.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace jdfilter {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunSettings {
  double dt = 0.0;
  std::vector<std::uint64_t> seeds;
  int n_paths = 1000;
  int n_particles = 1000;
  double resample_threshold = 0.5;
};

struct OutputSettings {
  std::string dir = "out";
  std::vector<std::string> solvers{"zakai"};
};

struct ExperimentConfig {
  std::string family;
  std::variant<std::monostate, FiniteStateSignalModel, JumpDiffusionSystem> model;
  RunSettings run;
  OutputSettings output;
  std::uint64_t config_hash = 0;

  const FiniteStateSignalModel& finite_model() const {
    if (!std::holds_alternative<FiniteStateSignalModel>(model))
      throw ConfigError("model.family: this command needs a finite_state model");
    return std::get<FiniteStateSignalModel>(model);
  }
  bool is_finite() const { return std::holds_alternative<FiniteStateSignalModel>(model); }
};

// Seed-list grammar shared by config files and CLI overrides: comma list
// and/or inclusive `a..b` ranges.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// Parse a configuration file; `overrides` is a canonical string appended to
// the hashed content so overridden runs are fingerprinted distinctly.
ExperimentConfig load_config(const std::string& path, const std::string& overrides = "");
ExperimentConfig parse_config_text(const std::string& text, const std::string& overrides = "");

}  // namespace jdfilter
