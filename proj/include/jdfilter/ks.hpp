#pragma once

// Direct solver for the nonlinear filtering equation on the probability
// simplex. Between observed jumps the filter moves by
//
//   dpi = { Qs^T pi - lambda .* pi + (pi.lambda) pi } dt
//         + (b1/sigma1 .* pi - pi(b1/sigma1) pi) dI,
//   dI  = dWtilde - pi(b1/sigma1) dt,
//
// and at an observed jump of size z it takes the normalized Bayes update with
// the a+ convention: when the filter assigns zero intensity to the observed
// size the gain vanishes and the event is flagged instead of failing. For a
// finite-state signal there is no diffusion component in the test functions,
// so the correlation gain term is identically zero whatever rho is.

#include "jdfilter/model.hpp"
#include "jdfilter/path.hpp"
#include "jdfilter/simulate.hpp"
#include "jdfilter/trajectory.hpp"
#include "jdfilter/zakai.hpp"

#include <cmath>
#include <optional>

namespace jdfilter {

// Jump update in its additive gain form (intensity-weighted reweighting plus
// the common-jump transport term), generic over the scalar. `total` is the
// per-state intensity of observed size-z jumps. Mass is preserved
// identically, so no renormalization happens here.
template <class Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> ks_jump_update(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& common_rates,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& total,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& pi) {
  const Scalar denom = total.dot(pi);
  if (denom == Scalar(0)) return pi;  // a+ convention: zero gain
  const Eigen::Vector<Scalar, Eigen::Dynamic> outflow = common_rates.rowwise().sum();
  Eigen::Vector<Scalar, Eigen::Dynamic> numer = total.cwiseProduct(pi) - denom * pi +
                                                common_rates.transpose() * pi -
                                                outflow.cwiseProduct(pi);
  return pi + numer / denom;
}

struct KsResult {
  FilterTrajectory filter;
  SolverDiagnostics diagnostics;
};

inline KsResult run_ks(const FiniteStateSignalModel& model, const ObservationPath& obs,
                       std::optional<Eigen::VectorXd> prior = std::nullopt) {
  const Eigen::Index n_pts = obs.t.size();
  if (n_pts < 1) throw std::invalid_argument("run_ks: empty observation path");
  const Eigen::VectorXd wt =
      obs.wtilde.size() == n_pts - 1 ? obs.wtilde : reconstruct_wtilde(model, obs);

  const JumpLookup jumps = make_jump_lookup(obs);
  for (const auto& j : obs.jumps)
    if (!model.is_admissible_size(j.size))
      throw std::invalid_argument("observation contains a jump size outside the admissible set");

  Eigen::VectorXd pi = prior ? *prior : model.prior();
  if (pi.size() != model.num_states() || (pi.array() < 0.0).any() ||
      std::abs(pi.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("run_ks: prior must be a probability vector");

  const Eigen::MatrixXd qs_t = model.silent_generator_matrix().transpose();
  const Eigen::VectorXd& lambda = model.observed_intensity();

  KsResult out;
  const Eigen::Index n_rows = n_pts + static_cast<Eigen::Index>(obs.jumps.size());
  out.filter.t.resize(n_rows);
  out.filter.post_jump.resize(static_cast<std::size_t>(n_rows));
  out.filter.probs.resize(n_rows, model.num_states());
  out.filter.innovation = Eigen::VectorXd::Zero(n_rows);

  Eigen::Index row = 0;
  const auto record = [&](double t, bool post, double innovation_increment) {
    out.filter.t[row] = t;
    out.filter.post_jump[static_cast<std::size_t>(row)] = post ? 1 : 0;
    out.filter.probs.row(row) = pi.transpose();
    out.filter.innovation[row] = innovation_increment;
    ++row;
  };

  record(obs.t[0], false, 0.0);
  for (Eigen::Index i = 0; i + 1 < n_pts; ++i) {
    const double dt = obs.t[i + 1] - obs.t[i];
    const Eigen::VectorXd gain = model.drift_gain(obs.t[i], obs.y[i]);
    const double mean_gain = gain.dot(pi);
    const double d_innovation = wt[i] - mean_gain * dt;
    Eigen::VectorXd next = pi + dt * (qs_t * pi - lambda.cwiseProduct(pi) + lambda.dot(pi) * pi) +
                           d_innovation * (gain.cwiseProduct(pi) - mean_gain * pi);
    const double mass = detail::clamp_negatives(next, &out.diagnostics);
    if (!(mass > 0.0) || !std::isfinite(mass))
      throw std::runtime_error("filter mass vanished between jumps");
    pi = next / mass;
    record(obs.t[i + 1], false, d_innovation);

    if (jumps.present[static_cast<std::size_t>(i + 1)]) {
      const double z = jumps.size[static_cast<std::size_t>(i + 1)];
      const double denom = model.observed_intensity_of_size(z).dot(pi);
      if (denom <= 0.0) {
        ++out.diagnostics.zero_gain_jumps;
      } else {
        Eigen::VectorXd updated = ks_jump_update<double>(
            model.common_jump_rates(z), model.observed_intensity_of_size(z), pi);
        const double m2 = detail::clamp_negatives(updated, &out.diagnostics);
        if (!(m2 > 0.0)) throw std::runtime_error("jump update produced an empty filter");
        pi = updated / m2;
      }
      record(obs.t[i + 1], true, 0.0);
    }
  }
  return out;
}

}  // namespace jdfilter
