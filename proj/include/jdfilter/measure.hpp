#pragma once

// Density processes of the reference-measure change and the diagnostics built
// on them.
//
// The reference measure turns the reconstructed Brownian motion into the
// driving noise and gives every observed jump size unit intensity. Its
// density factorizes into a continuous part (driven by the filter's drift
// gain) and a jump part (intensity reweighting); the inverse density is the
// total mass of the unnormalized filter.
//
// Everything is kept in log space. Per grid step the mass ratio is
//
//   r = 1 + pi(b1/sigma1) dWtilde + (eta(R) - pi(lambda)) dt,
//
// exactly the one-step mass growth of the linear solver, and at an observed
// jump of size z it is pi-(lambda_z). The log of r is split exactly into the
// jump-compensator factor (1 + a) and the remaining continuous factor, so the
// identities log_z = log_z0 + log_z1 and log_z + log_theta = 0 hold on the
// grid to rounding, while each piece still discretizes its continuous-time
// counterpart.

#include "jdfilter/model.hpp"
#include "jdfilter/path.hpp"
#include "jdfilter/rng.hpp"
#include "jdfilter/simulate.hpp"
#include "jdfilter/trajectory.hpp"
#include "jdfilter/zakai.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace jdfilter {

// Relative density linking the filter's jump compensator to the unit-atom
// reference measure at size z: 1 + psi = pi(lambda_z). A nonpositive value
// means the equivalence assumption fails at this point; that is reported
// through the flag, never asserted.
inline double psi_process(const FiniteStateSignalModel& model, const Eigen::VectorXd& pi,
                          double /*t*/, double /*y*/, double z, bool* equivalence_flag = nullptr) {
  if (!model.is_admissible_size(z))
    throw std::invalid_argument("psi_process: size is not in the admissible size set");
  const double intensity = model.observed_intensity_of_size(z).dot(pi);
  if (equivalence_flag) *equivalence_flag = !(intensity > 0.0);
  return intensity - 1.0;
}

struct DensityTrajectory {
  Eigen::VectorXd t;
  std::vector<std::uint8_t> post_jump;
  Eigen::VectorXd log_z0;     // continuous (drift-gain) factor
  Eigen::VectorXd log_z1;     // jump reweighting factor
  Eigen::VectorXd log_z;      // log of the full density
  Eigen::VectorXd log_theta;  // log of the inverse density = log filter mass

  Eigen::Index rows() const { return t.size(); }
};

// Integrate the density processes along an observation path, driven by an
// already-computed filter trajectory (aligned rows, both jump limits
// present).
inline DensityTrajectory density_processes(const FiniteStateSignalModel& model,
                                           const ObservationPath& obs,
                                           const FilterTrajectory& traj) {
  const Eigen::Index n_pts = obs.t.size();
  const Eigen::Index n_rows = traj.rows();
  if (n_rows != n_pts + static_cast<Eigen::Index>(obs.jumps.size()))
    throw std::invalid_argument("density_processes: trajectory does not match the observation");
  const Eigen::VectorXd wt =
      obs.wtilde.size() == n_pts - 1 ? obs.wtilde : reconstruct_wtilde(model, obs);

  const JumpLookup jumps = make_jump_lookup(obs);

  const double eta_mass = model.eta_total_mass();
  const Eigen::VectorXd& lambda = model.observed_intensity();

  DensityTrajectory out;
  out.t = traj.t;
  out.post_jump = traj.post_jump;
  out.log_z0 = Eigen::VectorXd::Zero(n_rows);
  out.log_z1 = Eigen::VectorXd::Zero(n_rows);
  out.log_z = Eigen::VectorXd::Zero(n_rows);
  out.log_theta = Eigen::VectorXd::Zero(n_rows);

  double lz0 = 0.0, lz1 = 0.0, lz = 0.0, ltheta = 0.0;
  Eigen::Index row = 0;
  const auto emit = [&](double t_expected) {
    if (traj.t[row] != t_expected)
      throw std::invalid_argument("density_processes: trajectory rows are misaligned");
    out.log_z0[row] = lz0;
    out.log_z1[row] = lz1;
    out.log_z[row] = lz;
    out.log_theta[row] = ltheta;
    ++row;
  };

  emit(obs.t[0]);
  for (Eigen::Index i = 0; i + 1 < n_pts; ++i) {
    const Eigen::VectorXd pi = traj.probs.row(row - 1).transpose();  // state at the left limit
    const double dt = obs.t[i + 1] - obs.t[i];
    const Eigen::VectorXd gain = model.drift_gain(obs.t[i], obs.y[i]);
    const double a = (eta_mass - lambda.dot(pi)) * dt;
    const double b = gain.dot(pi) * wt[i];
    const double r = 1.0 + a + b;
    if (!(r > 0.0) || !(1.0 + a > 0.0))
      throw std::runtime_error("density_processes: nonpositive mass factor");
    const double log_r = std::log(r);
    const double log_comp = std::log1p(a);
    ltheta += log_r;
    lz1 -= log_comp;
    lz0 -= log_r - log_comp;
    lz -= log_r;
    emit(obs.t[i + 1]);

    if (jumps.present[static_cast<std::size_t>(i + 1)]) {
      const Eigen::VectorXd pre = traj.probs.row(row - 1).transpose();
      bool flag = false;
      const double psi = psi_process(model, pre, obs.t[i + 1], obs.y[i + 1],
                                     jumps.size[static_cast<std::size_t>(i + 1)], &flag);
      if (flag || !(1.0 + psi > 0.0))
        throw std::runtime_error(
            "density_processes: observed jump with nonpositive relative intensity (equivalence "
            "failure)");
      const double log_jump = std::log1p(psi);
      ltheta += log_jump;
      lz1 -= log_jump;
      lz -= log_jump;
      emit(obs.t[i + 1]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo diagnostics.

struct ProtterShimboReport {
  int n_paths = 0;
  double mc_mean = 0.0;
  double mc_se = 0.0;
  double mc_max = 0.0;  // pathwise maximum; bounded by interval_bound when available
  bool bound_available = false;
  double interval_bound = 0.0;
  long degenerate_paths = 0;  // paths where some size lost all filter intensity
};

// Interval-arithmetic bound on the exponential functional from the model
// tables; available when sigma1 is constant and every size keeps strictly
// positive intensity in every state.
inline bool protter_shimbo_bound(const FiniteStateSignalModel& model, double* bound) {
  if (!model.sigma1().is_constant()) return false;
  const double sigma = model.sigma1().c0;
  if (!(sigma > 0.0)) return false;
  const double c_gain = model.b1_states().cwiseAbs().maxCoeff() / sigma;
  double jump_term = 0.0;
  for (double h : model.jump_sizes()) {
    const Eigen::VectorXd& lam = model.observed_intensity_of_size(h);
    const double lo = lam.minCoeff(), hi = lam.maxCoeff();
    if (!(lo > 0.0)) return false;
    const double u_abs = std::max(std::abs(1.0 / lo - 1.0), std::abs(1.0 / hi - 1.0));
    jump_term += u_abs * u_abs * hi;
  }
  *bound = std::exp(model.horizon() * (0.5 * c_gain * c_gain + jump_term));
  return true;
}

// Sampled exponential functional exp{ int (phi^2/2 + int U^2 d(compensator)) }
// along simulated filter runs. Reported, never asserted: a finite sample
// cannot certify an exponential moment.
inline ProtterShimboReport protter_shimbo_report(const FiniteStateSignalModel& model, int n_paths,
                                                 double dt, std::uint64_t seed) {
  if (n_paths < 1) throw std::invalid_argument("protter_shimbo_report: n_paths must be >= 1");
  ProtterShimboReport report;
  report.n_paths = n_paths;
  report.bound_available = protter_shimbo_bound(model, &report.interval_bound);

  double sum = 0.0, sum_sq = 0.0;
  for (int p = 0; p < n_paths; ++p) {
    const JointPath path = simulate_path(model, dt, derive_seed(seed, p));
    const ObservationPath obs = extract_observation(model, path);
    const ZakaiResult zakai = run_zakai(model, obs);

    const JumpLookup jumps = make_jump_lookup(obs);

    double integral = 0.0;
    bool degenerate = false;
    Eigen::Index row = 0;  // row holding the left-limit state of interval i
    for (Eigen::Index i = 0; i + 1 < obs.t.size(); ++i) {
      const Eigen::VectorXd pi = zakai.filter.probs.row(row).transpose();
      const double step = obs.t[i + 1] - obs.t[i];
      const double phi = model.drift_gain(obs.t[i], obs.y[i]).dot(pi);
      double jump_part = 0.0;
      for (double h : model.jump_sizes()) {
        const double intensity = model.observed_intensity_of_size(h).dot(pi);
        if (!(intensity > 0.0)) {
          degenerate = true;
          continue;
        }
        const double u = 1.0 / intensity - 1.0;
        jump_part += u * u * intensity;
      }
      integral += (0.5 * phi * phi + jump_part) * step;
      row += jumps.present[static_cast<std::size_t>(i + 1)] ? 2 : 1;
    }
    if (degenerate) ++report.degenerate_paths;
    const double value = std::exp(integral);
    sum += value;
    sum_sq += value * value;
    report.mc_max = std::max(report.mc_max, value);
  }
  report.mc_mean = sum / n_paths;
  const double var = std::max(0.0, sum_sq / n_paths - report.mc_mean * report.mc_mean);
  report.mc_se = n_paths > 1 ? std::sqrt(var / (n_paths - 1)) : 0.0;
  return report;
}

// Sampled integrability functionals along a solved run: the quantities whose
// finiteness defines admissible solutions of the filtering equations.
// Reported values, finite by inspection on healthy runs.
struct IntegrabilityDiagnostic {
  double normalized = 0.0;    // int pi(b2) + pi(b1/sigma1)^2 dt
  double unnormalized = 0.0;  // int rho(b2 + eta mass) + rho(b1 f/sigma1)^2-type dt
};

inline IntegrabilityDiagnostic integrability_diagnostic(const FiniteStateSignalModel& model,
                                                        const ObservationPath& obs,
                                                        const ZakaiResult& zakai) {
  const JumpLookup jumps = make_jump_lookup(obs);
  // b2 per state: |b0| + sigma0^2 vanish for pure-jump signals.
  const Eigen::VectorXd b2 = model.lambda0() + model.observed_intensity();
  IntegrabilityDiagnostic out;
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i + 1 < obs.t.size(); ++i) {
    const Eigen::VectorXd pi = zakai.filter.probs.row(row).transpose();
    const double mass = std::exp(zakai.unnormalized.log_mass[row]);
    const double dt = obs.t[i + 1] - obs.t[i];
    const double gain = model.drift_gain(obs.t[i], obs.y[i]).dot(pi);
    out.normalized += (b2.dot(pi) + gain * gain) * dt;
    out.unnormalized +=
        (mass * (b2.dot(pi) + model.eta_total_mass()) + mass * mass * gain * gain) * dt;
    row += jumps.present[static_cast<std::size_t>(i + 1)] ? 2 : 1;
  }
  return out;
}

struct MartingaleReport {
  struct SizeRate {
    double size = 0.0;
    double rate_mean = 0.0;
    double rate_se = 0.0;
    bool pass = false;
  };
  int n_paths = 0;
  double z_mean = 0.0;
  double z_se = 0.0;
  bool z_pass = false;
  std::vector<SizeRate> reweighted_rates;
};

// Two Girsanov consequences checked by Monte Carlo over independent paths:
// the terminal density has mean one under the physical measure, and under the
// reweighting every observed size's point process runs at unit rate.
inline MartingaleReport martingale_check(const FiniteStateSignalModel& model, int n_paths,
                                         double dt, std::uint64_t seed) {
  if (n_paths < 100) throw std::invalid_argument("martingale_check: n_paths must be >= 100");
  const double horizon = model.horizon();
  const auto& sizes = model.jump_sizes();

  std::vector<double> z_samples(static_cast<std::size_t>(n_paths));
  std::vector<std::vector<double>> rate_samples(sizes.size(),
                                                std::vector<double>(static_cast<std::size_t>(n_paths)));
  for (int p = 0; p < n_paths; ++p) {
    const JointPath path = simulate_path(model, dt, derive_seed(seed, p));
    const ObservationPath obs = extract_observation(model, path);
    const ZakaiResult zakai = run_zakai(model, obs);
    const DensityTrajectory dens = density_processes(model, obs, zakai.filter);
    const double z_terminal = std::exp(dens.log_z[dens.rows() - 1]);
    z_samples[static_cast<std::size_t>(p)] = z_terminal;
    for (std::size_t h = 0; h < sizes.size(); ++h) {
      long count = 0;
      for (const auto& j : obs.jumps)
        if (j.size == sizes[h]) ++count;
      rate_samples[h][static_cast<std::size_t>(p)] = z_terminal * count / horizon;
    }
  }

  const auto mean_se = [n_paths](const std::vector<double>& v, double* mean, double* se) {
    double s = 0.0;
    for (double x : v) s += x;
    *mean = s / n_paths;
    double ss = 0.0;
    for (double x : v) ss += (x - *mean) * (x - *mean);
    *se = n_paths > 1 ? std::sqrt(ss / (n_paths - 1) / n_paths) : 0.0;
  };

  MartingaleReport report;
  report.n_paths = n_paths;
  mean_se(z_samples, &report.z_mean, &report.z_se);
  report.z_pass = std::abs(report.z_mean - 1.0) <= 3.0 * report.z_se;
  for (std::size_t h = 0; h < sizes.size(); ++h) {
    MartingaleReport::SizeRate r;
    r.size = sizes[h];
    mean_se(rate_samples[h], &r.rate_mean, &r.rate_se);
    r.pass = std::abs(r.rate_mean - 1.0) <= 3.0 * r.rate_se;
    report.reweighted_rates.push_back(r);
  }
  return report;
}

}  // namespace jdfilter
