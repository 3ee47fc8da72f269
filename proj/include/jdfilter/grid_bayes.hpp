#pragma once

// Independent ground truth for finite-state signals: an exact discrete-time
// Bayes recursion on the observation grid. Each interval contributes
//
//   * a Gaussian likelihood for the continuous observation increment given
//     the (left) signal state: mean b1(u) dt, variance sigma1^2 dt;
//   * a transition/jump factor: on intervals without an observed jump the
//     signal moves along observation-silent transitions (I + Qs dt) with the
//     no-jump probability exp(-lambda(u) dt); on intervals ending in an
//     observed jump of size z the step kernel is the size-z jump kernel
//     (common transitions plus signal-silent jumps), whose row mass is the
//     jump likelihood lambda_z(u) dt.
//
// The recursion shares no code path with the linear-equation solver; it works
// on raw Y increments and never touches the reconstructed Brownian motion.

#include "jdfilter/model.hpp"
#include "jdfilter/path.hpp"
#include "jdfilter/trajectory.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

namespace jdfilter {

inline FilterTrajectory grid_bayes_filter(const FiniteStateSignalModel& model,
                                          const ObservationPath& obs,
                                          std::optional<Eigen::VectorXd> prior = std::nullopt) {
  const Eigen::Index n_pts = obs.t.size();
  if (n_pts < 1) throw std::invalid_argument("grid_bayes_filter: empty observation path");
  const int n = model.num_states();

  const JumpLookup jumps = make_jump_lookup(obs);

  Eigen::VectorXd p = prior ? *prior : model.prior();

  const Eigen::MatrixXd& qs = model.silent_generator_matrix();
  const Eigen::VectorXd& lambda = model.observed_intensity();
  const Eigen::VectorXd silent_outflow = -qs.diagonal();

  FilterTrajectory out;
  const Eigen::Index n_rows = n_pts + static_cast<Eigen::Index>(obs.jumps.size());
  out.t.resize(n_rows);
  out.post_jump.resize(static_cast<std::size_t>(n_rows));
  out.probs.resize(n_rows, n);
  Eigen::Index row = 0;
  const auto record = [&](double t, bool post, const Eigen::VectorXd& v) {
    out.t[row] = t;
    out.post_jump[static_cast<std::size_t>(row)] = post ? 1 : 0;
    out.probs.row(row) = v.transpose();
    ++row;
  };

  record(obs.t[0], false, p);
  for (Eigen::Index i = 0; i + 1 < n_pts; ++i) {
    const double dt = obs.t[i + 1] - obs.t[i];
    if ((silent_outflow.maxCoeff() * dt) >= 1.0)
      throw std::invalid_argument("grid_bayes_filter: dt too coarse for the transition rates");
    const double y = obs.y[i];
    const double t = obs.t[i];
    const double sigma = model.sigma1_at(t, y);
    const double var = sigma * sigma * dt;
    const bool jump = jumps.present[static_cast<std::size_t>(i + 1)] != 0;
    const double dy_cont =
        obs.y[i + 1] - y - (jump ? jumps.size[static_cast<std::size_t>(i + 1)] : 0.0);

    // Per-state Gaussian likelihood of the continuous increment.
    Eigen::VectorXd weighted(n);
    for (int u = 0; u < n; ++u) {
      const double mean = model.b1_states()[u] * dt;
      const double d = dy_cont - mean;
      weighted[u] = p[u] * std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
    }

    Eigen::VectorXd next(n);
    if (!jump) {
      // exp(-lambda dt) no-jump factor, then silent transitions I + Qs dt.
      Eigen::VectorXd held = weighted.cwiseProduct((-lambda * dt).array().exp().matrix());
      next = held + dt * (qs.transpose() * held);
    } else {
      const double z = jumps.size[static_cast<std::size_t>(i + 1)];
      if (!model.is_admissible_size(z))
        throw std::invalid_argument("observation contains a jump size outside the admissible set");
      // Pre-jump row: the silent propagation of the Gaussian-updated state.
      Eigen::VectorXd held = weighted.cwiseProduct((-lambda * dt).array().exp().matrix());
      Eigen::VectorXd pre = held + dt * (qs.transpose() * held);
      const double pre_mass = pre.sum();
      if (!(pre_mass > 0.0))
        throw std::runtime_error("grid_bayes_filter: zero likelihood (model/data inconsistency)");
      record(obs.t[i + 1], false, pre / pre_mass);
      // Jump kernel: stay with the signal-silent size-z intensity, move along
      // common size-z transitions; row mass is the jump likelihood.
      next = model.stay_jump_rates(z).cwiseProduct(weighted) +
             model.common_jump_rates(z).transpose() * weighted;
      next *= dt;
    }

    const double mass = next.sum();
    if (!(mass > 0.0) || !std::isfinite(mass))
      throw std::runtime_error("grid_bayes_filter: zero likelihood (model/data inconsistency)");
    p = next / mass;
    record(obs.t[i + 1], jump, p);
  }
  return out;
}

}  // namespace jdfilter
