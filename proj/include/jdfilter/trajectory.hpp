#pragma once

// Filter trajectories over an observation grid. Jump times contribute two
// rows, the left limit and the post-jump value, flagged by `post_jump`.

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace jdfilter {

struct FilterTrajectory {
  Eigen::VectorXd t;
  std::vector<std::uint8_t> post_jump;  // 1 on rows recorded just after a jump
  Eigen::MatrixXd probs;                // one probability vector per row
  Eigen::VectorXd innovation;           // per-row innovation increment (KS only), or empty

  Eigen::Index rows() const { return t.size(); }
};

// The unnormalized filter, stored as (normalized vector, log total mass); the
// raw mass drifts exponentially and would under/overflow on long horizons.
struct UnnormalizedFilterTrajectory {
  Eigen::VectorXd t;
  std::vector<std::uint8_t> post_jump;
  Eigen::MatrixXd probs;
  Eigen::VectorXd log_mass;

  Eigen::Index rows() const { return t.size(); }
};

inline void check_aligned(const FilterTrajectory& a, const FilterTrajectory& b) {
  if (a.t.size() != b.t.size() || a.probs.cols() != b.probs.cols())
    throw std::invalid_argument("trajectories are not aligned");
  for (Eigen::Index i = 0; i < a.t.size(); ++i)
    if (a.t[i] != b.t[i] || a.post_jump[i] != b.post_jump[i])
      throw std::invalid_argument("trajectories are not aligned");
}

inline double sup_l1_distance(const FilterTrajectory& a, const FilterTrajectory& b) {
  check_aligned(a, b);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double d = (a.probs.row(i) - b.probs.row(i)).cwiseAbs().sum();
    if (d > worst) worst = d;
  }
  return worst;
}

inline double final_l1_distance(const FilterTrajectory& a, const FilterTrajectory& b) {
  check_aligned(a, b);
  const Eigen::Index i = a.rows() - 1;
  return (a.probs.row(i) - b.probs.row(i)).cwiseAbs().sum();
}

// CSV schema: `t,log_mass,pi_<label0>,...`; jump rows appear twice, left
// limit first. Solvers without a mass component write log_mass = 0. Defined
// in trajectory_io.cpp.
void write_filter_csv(const std::string& path, const FilterTrajectory& traj,
                      const std::vector<std::string>& state_labels,
                      const Eigen::VectorXd* log_mass = nullptr,
                      const std::string& manifest_line = "");
FilterTrajectory read_filter_csv(const std::string& path);

}  // namespace jdfilter
