#pragma once

// Path containers produced by the simulator and consumed by the solvers.

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace jdfilter {

struct ObservedJump {
  std::ptrdiff_t grid_index = 0;  // index of the jump time in the grid
  double time = 0.0;
  double size = 0.0;  // nonzero, member of the admissible size set
};

// Observed data only: grid, Y samples, jump list, and the reconstructed
// increments of the driving Brownian motion under the reference measure.
// `wtilde` is derived data (it needs sigma1); it is left empty by the loader
// and filled by reconstruct_wtilde / extract_observation.
struct ObservationPath {
  Eigen::VectorXd t;
  Eigen::VectorXd y;
  std::vector<ObservedJump> jumps;
  Eigen::VectorXd wtilde;  // one entry per grid interval, or empty

  std::ptrdiff_t num_points() const { return t.size(); }
};

// Full simulated trajectory: signal and observation samples on the grid,
// observed jumps with the marks that produced them, and the Brownian
// increments actually used (retained for round-trip tests).
struct JointPath {
  struct Jump {
    std::ptrdiff_t grid_index = 0;
    double time = 0.0;
    double size = 0.0;
    std::string mark;
  };

  Eigen::VectorXd t;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  std::vector<Jump> jumps;
  Eigen::VectorXd w0;  // per-interval increments of the signal Brownian
  Eigen::VectorXd w1;  // per-interval increments of the observation Brownian

  std::ptrdiff_t num_points() const { return t.size(); }
};

// Per-grid-point jump table used by the solvers; validates that jump indices
// point at interior grid rows with matching, strictly increasing times.
struct JumpLookup {
  std::vector<char> present;
  std::vector<double> size;
};

inline JumpLookup make_jump_lookup(const ObservationPath& obs) {
  JumpLookup lookup;
  const auto n = static_cast<std::size_t>(obs.t.size());
  lookup.present.assign(n, 0);
  lookup.size.assign(n, 0.0);
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& j : obs.jumps) {
    if (j.grid_index < 1 || j.grid_index >= obs.t.size())
      throw std::invalid_argument("observed jump index outside the grid interior");
    if (obs.t[j.grid_index] != j.time)
      throw std::invalid_argument("observed jump time does not match its grid point");
    if (!(j.time > prev)) throw std::invalid_argument("observed jump times must increase");
    if (j.size == 0.0) throw std::invalid_argument("observed jump size must be nonzero");
    prev = j.time;
    lookup.present[static_cast<std::size_t>(j.grid_index)] = 1;
    lookup.size[static_cast<std::size_t>(j.grid_index)] = j.size;
  }
  return lookup;
}

}  // namespace jdfilter
