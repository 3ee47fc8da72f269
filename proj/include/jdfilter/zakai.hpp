#pragma once

// Exact-recursive solver for the linear (unnormalized) filtering equation of
// a finite-state pure-jump signal observed through a jump-diffusion.
//
// Between observed jumps the unnormalized weights V(u) satisfy a linear SDE
// driven by the reconstructed Brownian increments:
//
//   dV = A V dt + (b1/sigma1 .* V) dWtilde,
//   A  = eta(R) I + Qs^T - diag(lambda_total),
//
// where Qs is the observation-silent part of the signal generator and
// lambda_total the per-state observed-jump intensity. At an observed jump of
// size z the weights update linearly:
//
//   V'(u) = stay_z(u) V(u) + sum_v common_z(v, u) V(v),
//
// with stay_z the intensity of size-z jumps that leave the signal in place
// and common_z the common-jump transition rates of that size. The reference
// jump measure has unit atoms, so its Radon-Nikodym derivatives are plain
// atom evaluations; no density estimation appears anywhere.
//
// V is stored as a normalized vector plus the log of its total mass; every
// step renormalizes and folds the mass ratio into the log.

#include "jdfilter/model.hpp"
#include "jdfilter/path.hpp"
#include "jdfilter/simulate.hpp"
#include "jdfilter/trajectory.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

namespace jdfilter {

// Entries of a normalized weight vector may cross zero transiently on stiff
// steps; values in (kNegativeTolerance, 0) are clamped to zero and counted,
// anything below is an error.
inline constexpr double kNegativeTolerance = -1e-9;

struct SolverDiagnostics {
  long negative_clamps = 0;
  long zero_gain_jumps = 0;  // observed jumps where the filter carried no mass
};

struct UnnormalizedFilterState {
  Eigen::VectorXd probs;  // normalized weights
  double log_mass = 0.0;  // log of the total unnormalized mass
  double t = 0.0;
};

// --- scalar-generic kernels -------------------------------------------------
// The update algebra is templated on the scalar so tests can replay it in
// exact arithmetic.

// One Euler step of the between-jump linear equation (unnormalized output).
template <class Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> linear_filter_euler_step(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& drift,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& gain,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& v, const Scalar& dt, const Scalar& dw) {
  return v + dt * (drift * v) + dw * gain.cwiseProduct(v);
}

// Jump part of the linear equation at an observed size (unnormalized).
template <class Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> observed_jump_update(
    const Eigen::Vector<Scalar, Eigen::Dynamic>& stay_rates,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& common_rates,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& v) {
  return stay_rates.cwiseProduct(v) + common_rates.transpose() * v;
}

namespace detail {

inline double clamp_negatives(Eigen::VectorXd& probs, SolverDiagnostics* diag) {
  for (Eigen::Index u = 0; u < probs.size(); ++u) {
    if (probs[u] < 0.0) {
      if (probs[u] < kNegativeTolerance)
        throw std::runtime_error("filter weight went negative beyond tolerance");
      probs[u] = 0.0;
      if (diag) ++diag->negative_clamps;
    }
  }
  return probs.sum();
}

}  // namespace detail

// Advance the unnormalized filter across the grid intervals
// [i_begin, i_end) of `obs`; the slice must contain no jump times in its
// interior (jumps sit on grid points and are applied by zakai_jump_update).
inline UnnormalizedFilterState zakai_between_jumps(const FiniteStateSignalModel& model,
                                                   UnnormalizedFilterState state,
                                                   const ObservationPath& obs,
                                                   Eigen::Index i_begin, Eigen::Index i_end,
                                                   SolverDiagnostics* diag = nullptr) {
  for (const auto& j : obs.jumps)
    if (j.grid_index > i_begin && j.grid_index < i_end)
      throw std::invalid_argument("zakai_between_jumps: segment contains an interior jump");
  const Eigen::MatrixXd& drift = model.between_jump_matrix();
  for (Eigen::Index i = i_begin; i < i_end; ++i) {
    const double dt = obs.t[i + 1] - obs.t[i];
    const Eigen::VectorXd gain = model.drift_gain(obs.t[i], obs.y[i]);
    Eigen::VectorXd v =
        linear_filter_euler_step<double>(drift, gain, state.probs, dt, obs.wtilde[i]);
    const double mass = detail::clamp_negatives(v, diag);
    if (!(mass > 0.0) || !std::isfinite(mass))
      throw std::runtime_error("unnormalized filter mass vanished between jumps");
    state.probs = v / mass;
    state.log_mass += std::log(mass);
    state.t = obs.t[i + 1];
  }
  return state;
}

// Apply the observed jump of size z at t_jump.
inline UnnormalizedFilterState zakai_jump_update(const FiniteStateSignalModel& model,
                                                 UnnormalizedFilterState state, double t_jump,
                                                 double z, SolverDiagnostics* diag = nullptr) {
  if (!model.is_admissible_size(z))
    throw std::invalid_argument("observed jump size is not in the admissible size set");
  Eigen::VectorXd v = observed_jump_update<double>(model.stay_jump_rates(z),
                                                   model.common_jump_rates(z), state.probs);
  const double mass = detail::clamp_negatives(v, diag);
  if (!(mass > 0.0))
    throw std::runtime_error(
        "observed jump impossible given the filter support (model/data inconsistency)");
  state.probs = v / mass;
  state.log_mass += std::log(mass);
  state.t = t_jump;
  return state;
}

struct ZakaiResult {
  UnnormalizedFilterTrajectory unnormalized;
  FilterTrajectory filter;
  SolverDiagnostics diagnostics;
};

// Full run over an observation path: alternate between-jump integration and
// jump updates, recording both limits at each jump time.
inline ZakaiResult run_zakai(const FiniteStateSignalModel& model, const ObservationPath& obs,
                             std::optional<Eigen::VectorXd> prior = std::nullopt) {
  const Eigen::Index n_pts = obs.t.size();
  if (n_pts < 1) throw std::invalid_argument("run_zakai: empty observation path");
  const Eigen::VectorXd wt =
      obs.wtilde.size() == n_pts - 1 ? obs.wtilde : reconstruct_wtilde(model, obs);
  ObservationPath local = obs;
  local.wtilde = wt;

  const JumpLookup jumps = make_jump_lookup(obs);
  for (const auto& j : obs.jumps)
    if (!model.is_admissible_size(j.size))
      throw std::invalid_argument("observation contains a jump size outside the admissible set");

  UnnormalizedFilterState state;
  state.probs = prior ? *prior : model.prior();
  if (state.probs.size() != model.num_states() || (state.probs.array() < 0.0).any() ||
      std::abs(state.probs.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("run_zakai: prior must be a probability vector");
  state.log_mass = 0.0;
  state.t = obs.t[0];

  ZakaiResult out;
  const Eigen::Index n_rows = n_pts + static_cast<Eigen::Index>(obs.jumps.size());
  out.unnormalized.t.resize(n_rows);
  out.unnormalized.post_jump.resize(static_cast<std::size_t>(n_rows));
  out.unnormalized.probs.resize(n_rows, model.num_states());
  out.unnormalized.log_mass.resize(n_rows);

  Eigen::Index row = 0;
  const auto record = [&](bool post) {
    out.unnormalized.t[row] = state.t;
    out.unnormalized.post_jump[static_cast<std::size_t>(row)] = post ? 1 : 0;
    out.unnormalized.probs.row(row) = state.probs.transpose();
    out.unnormalized.log_mass[row] = state.log_mass;
    ++row;
  };

  record(false);
  for (Eigen::Index i = 0; i + 1 < n_pts; ++i) {
    state = zakai_between_jumps(model, state, local, i, i + 1, &out.diagnostics);
    record(false);
    if (jumps.present[static_cast<std::size_t>(i + 1)]) {
      state = zakai_jump_update(model, state, obs.t[i + 1],
                                jumps.size[static_cast<std::size_t>(i + 1)], &out.diagnostics);
      record(true);
    }
  }

  out.filter.t = out.unnormalized.t;
  out.filter.post_jump = out.unnormalized.post_jump;
  out.filter.probs = out.unnormalized.probs;
  return out;
}

}  // namespace jdfilter
