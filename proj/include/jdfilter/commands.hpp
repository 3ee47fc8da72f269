#pragma once

// Experiment orchestration behind the CLI subcommands. Each command takes a
// parsed configuration, writes its outputs under the configured directory
// (every file carries a manifest line with the config fingerprint), and
// returns a process exit code.

#include "jdfilter/config.hpp"

namespace jdfilter {

std::string manifest_line(const ExperimentConfig& cfg);

// Simulate one joint path per seed; writes path_seed*.csv, obs_seed*.csv (+
// jump tables) and manifest.txt.
int cmd_simulate(const ExperimentConfig& cfg);

// Run the configured solvers on previously simulated observation files;
// writes filter_<solver>_seed*.csv and summary.csv with pairwise sup-L1
// distances per seed.
int cmd_filter(const ExperimentConfig& cfg);

// Recompute the pairwise distance summary from existing filter CSVs.
int cmd_compare(const ExperimentConfig& cfg);

// Consolidated diagnostics: hard invariants (normalization, positivity, mass
// consistency) decide the exit code; measure-change and assumption lints are
// reported as flags only.
int cmd_diagnose(const ExperimentConfig& cfg);

}  // namespace jdfilter
