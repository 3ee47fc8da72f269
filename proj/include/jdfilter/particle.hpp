#pragma once

// Weighted particle filters: the filter expressed as a ratio of reference
// expectations, approximated by an ensemble propagated under the signal's own
// law and reweighted by the same per-interval likelihood factors the grid
// recursion uses. Two variants:
//
//   * finite-state signals: proposals follow the exact per-interval kernels
//     (silent transitions between observed jumps, common-jump moves at
//     observed jump times), so the only gap to the grid recursion is Monte
//     Carlo noise;
//   * diffusion signals: Euler propagation with thinned signal-only marks, a
//     reference for models with no finite exact filter. Outputs are labeled
//     approximate.
//
// Determinism: particle i draws from a substream keyed by (seed, i), the
// resampler from its own tagged substream, so results do not depend on how
// particles are scheduled.

#include "jdfilter/model.hpp"
#include "jdfilter/path.hpp"
#include "jdfilter/rng.hpp"
#include "jdfilter/trajectory.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace jdfilter {

struct ParticleEnsemble {
  Eigen::VectorXd particles;  // state values
  Eigen::VectorXd weights;    // normalized
  double t = 0.0;
  double ess = 0.0;
};

struct ParticleResult {
  FilterTrajectory filter;
  ParticleEnsemble final_ensemble;
  Eigen::VectorXd ess;  // per recorded row
  int resample_count = 0;
};

namespace detail {

inline constexpr std::uint64_t kResampleStreamTag = 0x9e3779b97f4a7c15ull;

inline double effective_sample_size(const Eigen::VectorXd& w) { return 1.0 / w.squaredNorm(); }

// Multinomial resampling; ancestors drawn from the dedicated stream.
inline void multinomial_resample(std::vector<int>& states, Eigen::VectorXd& weights, Rng& rng) {
  const int n = static_cast<int>(states.size());
  Eigen::VectorXd cum(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += weights[i];
    cum[i] = acc;
  }
  std::vector<int> next(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform() * acc;
    const int k = static_cast<int>(
        std::lower_bound(cum.data(), cum.data() + n, u) - cum.data());
    next[static_cast<std::size_t>(i)] = states[static_cast<std::size_t>(std::min(k, n - 1))];
  }
  states = std::move(next);
  weights.setConstant(1.0 / n);
}

// Deterministic stratified assignment of initial states from the prior.
inline std::vector<int> stratified_initial_states(const Eigen::VectorXd& prior, int n_particles) {
  std::vector<int> states(static_cast<std::size_t>(n_particles));
  int u = 0;
  double cum = prior[0];
  for (int i = 0; i < n_particles; ++i) {
    const double q = (i + 0.5) / n_particles;
    while (q > cum && u + 1 < prior.size()) cum += prior[++u];
    states[static_cast<std::size_t>(i)] = u;
  }
  return states;
}

}  // namespace detail

inline ParticleResult particle_filter(const FiniteStateSignalModel& model,
                                      const ObservationPath& obs, int n_particles,
                                      std::uint64_t seed, double resample_threshold,
                                      std::optional<Eigen::VectorXd> prior = std::nullopt) {
  if (n_particles < 1) throw std::invalid_argument("particle_filter: need >= 1 particle");
  if (!(resample_threshold > 0.0 && resample_threshold <= 1.0))
    throw std::invalid_argument("particle_filter: resample threshold must lie in (0, 1]");
  const Eigen::Index n_pts = obs.t.size();
  if (n_pts < 1) throw std::invalid_argument("particle_filter: empty observation path");
  const int n_states = model.num_states();

  const JumpLookup jumps = make_jump_lookup(obs);

  const Eigen::VectorXd p0 = prior ? *prior : model.prior();
  std::vector<int> states = detail::stratified_initial_states(p0, n_particles);
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(n_particles, 1.0 / n_particles);

  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(n_particles));
  for (int i = 0; i < n_particles; ++i)
    streams.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(i)));
  Rng resample_rng(derive_seed(seed, detail::kResampleStreamTag));

  const Eigen::MatrixXd& qs = model.silent_generator_matrix();
  const Eigen::VectorXd& lambda = model.observed_intensity();
  const Eigen::VectorXd silent_outflow = -qs.diagonal();

  ParticleResult out;
  const Eigen::Index n_rows = n_pts + static_cast<Eigen::Index>(obs.jumps.size());
  out.filter.t.resize(n_rows);
  out.filter.post_jump.resize(static_cast<std::size_t>(n_rows));
  out.filter.probs.resize(n_rows, n_states);
  out.ess.resize(n_rows);

  Eigen::Index row = 0;
  const auto record = [&](double t, bool post) {
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(n_states);
    for (int i = 0; i < n_particles; ++i) pi[states[static_cast<std::size_t>(i)]] += weights[i];
    out.filter.t[row] = t;
    out.filter.post_jump[static_cast<std::size_t>(row)] = post ? 1 : 0;
    out.filter.probs.row(row) = pi.transpose();
    out.ess[row] = detail::effective_sample_size(weights);
    ++row;
  };

  const auto renormalize = [&]() {
    const double total = weights.sum();
    if (!(total > 0.0))
      throw std::runtime_error("particle_filter: weight collapse (model/data inconsistency)");
    weights /= total;
  };

  record(obs.t[0], false);
  for (Eigen::Index step = 0; step + 1 < n_pts; ++step) {
    const double dt = obs.t[step + 1] - obs.t[step];
    if (silent_outflow.maxCoeff() * dt >= 1.0)
      throw std::invalid_argument("particle_filter: dt too coarse for the transition rates");
    const double y = obs.y[step];
    const double t = obs.t[step];
    const double sigma = model.sigma1_at(t, y);
    const double var = sigma * sigma * dt;
    const bool jump = jumps.present[static_cast<std::size_t>(step + 1)] != 0;
    const double z = jumps.size[static_cast<std::size_t>(step + 1)];
    const double dy_cont = obs.y[step + 1] - y - (jump ? z : 0.0);

    // Likelihood factors depend on the particle only through its state;
    // tabulate them once per step.
    Eigen::VectorXd gaussian(n_states);
    for (int u = 0; u < n_states; ++u) {
      const double d = dy_cont - model.b1_states()[u] * dt;
      gaussian[u] = std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
    }

    if (!jump) {
      Eigen::VectorXd factor(n_states), stay_prob(n_states);
      for (int u = 0; u < n_states; ++u) {
        factor[u] = gaussian[u] * std::exp(-lambda[u] * dt);
        stay_prob[u] = 1.0 - silent_outflow[u] * dt;
      }
      for (int i = 0; i < n_particles; ++i) {
        const int u = states[static_cast<std::size_t>(i)];
        weights[i] *= factor[u];
        Rng& rng = streams[static_cast<std::size_t>(i)];
        const double draw = rng.uniform();
        if (draw >= stay_prob[u]) {
          double acc = stay_prob[u];
          for (int v = 0; v < n_states; ++v) {
            if (v == u) continue;
            acc += qs(u, v) * dt;
            if (draw < acc) {
              states[static_cast<std::size_t>(i)] = v;
              break;
            }
          }
        }
      }
      renormalize();
      record(obs.t[step + 1], false);
    } else {
      for (int i = 0; i < n_particles; ++i)
        weights[i] *= gaussian[states[static_cast<std::size_t>(i)]];
      {
        // Left-limit row before the jump information enters.
        Eigen::VectorXd saved = weights;
        renormalize();
        record(obs.t[step + 1], false);
        weights = std::move(saved);
      }
      const Eigen::VectorXd& stay = model.stay_jump_rates(z);
      const Eigen::MatrixXd& common = model.common_jump_rates(z);
      const Eigen::VectorXd& total = model.observed_intensity_of_size(z);
      for (int i = 0; i < n_particles; ++i) {
        const int u = states[static_cast<std::size_t>(i)];
        if (total[u] <= 0.0) {
          weights[i] = 0.0;
          continue;
        }
        weights[i] *= total[u];
        Rng& rng = streams[static_cast<std::size_t>(i)];
        const double draw = rng.uniform() * total[u];
        if (draw >= stay[u]) {
          double acc = stay[u];
          for (int v = 0; v < n_states; ++v) {
            if (v == u) continue;
            acc += common(u, v);
            if (draw < acc) {
              states[static_cast<std::size_t>(i)] = v;
              break;
            }
          }
        }
      }
      renormalize();
      record(obs.t[step + 1], true);
    }

    if (detail::effective_sample_size(weights) < resample_threshold * n_particles) {
      detail::multinomial_resample(states, weights, resample_rng);
      ++out.resample_count;
    }
  }

  out.final_ensemble.particles.resize(n_particles);
  for (int i = 0; i < n_particles; ++i)
    out.final_ensemble.particles[i] = model.states()[states[static_cast<std::size_t>(i)]];
  out.final_ensemble.weights = weights;
  out.final_ensemble.t = obs.t[n_pts - 1];
  out.final_ensemble.ess = detail::effective_sample_size(weights);
  return out;
}

// Diffusion-signal variant: Euler steps for the signal, exact thinning of the
// marked measure per interval, common-jump proposals at observed jump times.
// The output is an ensemble summary; there is no exact finite filter to
// compare against, so results are approximate by construction.
struct DiffusionParticleResult {
  Eigen::VectorXd t;
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  ParticleEnsemble final_ensemble;
  int resample_count = 0;
};

inline DiffusionParticleResult particle_filter(const JumpDiffusionSystem& model,
                                               const ObservationPath& obs, int n_particles,
                                               std::uint64_t seed, double resample_threshold) {
  if (n_particles < 1) throw std::invalid_argument("particle_filter: need >= 1 particle");
  if (!(resample_threshold > 0.0 && resample_threshold <= 1.0))
    throw std::invalid_argument("particle_filter: resample threshold must lie in (0, 1]");
  const Eigen::Index n_pts = obs.t.size();
  if (n_pts < 1) throw std::invalid_argument("particle_filter: empty observation path");
  const MarkedSystemView view = model.view();

  const JumpLookup jumps = make_jump_lookup(obs);

  std::vector<double> xs(static_cast<std::size_t>(n_particles), model.x0());
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(n_particles, 1.0 / n_particles);
  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(n_particles));
  for (int i = 0; i < n_particles; ++i)
    streams.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(i)));
  Rng resample_rng(derive_seed(seed, detail::kResampleStreamTag));

  DiffusionParticleResult out;
  out.t.resize(n_pts);
  out.mean.resize(n_pts);
  out.variance.resize(n_pts);

  const auto summarize = [&](Eigen::Index row, double t) {
    double m = 0.0;
    for (int i = 0; i < n_particles; ++i) m += weights[i] * xs[static_cast<std::size_t>(i)];
    double v = 0.0;
    for (int i = 0; i < n_particles; ++i) {
      const double d = xs[static_cast<std::size_t>(i)] - m;
      v += weights[i] * d * d;
    }
    out.t[row] = t;
    out.mean[row] = m;
    out.variance[row] = v;
  };

  summarize(0, obs.t[0]);
  const auto& marks = model.marks().marks();
  for (Eigen::Index step = 0; step + 1 < n_pts; ++step) {
    const double dt = obs.t[step + 1] - obs.t[step];
    const double t = obs.t[step];
    const double y = obs.y[step];
    const double sigma = view.diffusion_sigma1(t, y);
    const double var = sigma * sigma * dt;
    const bool jump = jumps.present[static_cast<std::size_t>(step + 1)] != 0;
    const double z = jumps.size[static_cast<std::size_t>(step + 1)];
    const double dy_cont = obs.y[step + 1] - y - (jump ? z : 0.0);

    for (int i = 0; i < n_particles; ++i) {
      double& x = xs[static_cast<std::size_t>(i)];
      Rng& rng = streams[static_cast<std::size_t>(i)];
      const double d = dy_cont - view.b1(t, x, y) * dt;
      weights[i] *= std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);

      // Signal diffusion.
      const double x_left = x;
      x += view.b0(t, x_left, y) * dt +
           view.diffusion_sigma0(t, x_left, y) * std::sqrt(dt) * rng.normal();

      if (!jump) {
        // No observed jump: weight by the no-jump probability, fire
        // signal-only marks by per-interval thinning.
        double lambda_obs = 0.0;
        for (const auto& m : marks)
          if (m.observed_jump(t, x_left, y) != 0.0) lambda_obs += m.weight;
        weights[i] *= std::exp(-lambda_obs * dt);
        for (const auto& m : marks) {
          if (m.observed_jump(t, x_left, y) != 0.0) continue;
          const double k0 = m.signal_jump(t, x_left);
          if (k0 == 0.0) continue;
          if (rng.uniform() < -std::expm1(-m.weight * dt)) x += k0;
        }
      } else {
        // Observed jump of size z: propose a producing mark by intensity.
        double total = 0.0;
        for (const auto& m : marks)
          if (m.observed_jump(t, x_left, y) == z) total += m.weight;
        if (total <= 0.0) {
          weights[i] = 0.0;
          continue;
        }
        weights[i] *= total;
        const double draw = rng.uniform() * total;
        double acc = 0.0;
        for (const auto& m : marks) {
          if (m.observed_jump(t, x_left, y) != z) continue;
          acc += m.weight;
          if (draw < acc) {
            x += m.signal_jump(t, x_left);
            break;
          }
        }
      }
    }

    const double total_w = weights.sum();
    if (!(total_w > 0.0))
      throw std::runtime_error("particle_filter: weight collapse (model/data inconsistency)");
    weights /= total_w;
    summarize(step + 1, obs.t[step + 1]);

    if (detail::effective_sample_size(weights) < resample_threshold * n_particles) {
      // Reuse the integer resampler through an index indirection.
      std::vector<int> idx(static_cast<std::size_t>(n_particles));
      for (int i = 0; i < n_particles; ++i) idx[static_cast<std::size_t>(i)] = i;
      detail::multinomial_resample(idx, weights, resample_rng);
      std::vector<double> nxt(static_cast<std::size_t>(n_particles));
      for (int i = 0; i < n_particles; ++i)
        nxt[static_cast<std::size_t>(i)] = xs[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      xs = std::move(nxt);
      ++out.resample_count;
    }
  }

  out.final_ensemble.particles =
      Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  out.final_ensemble.weights = weights;
  out.final_ensemble.t = obs.t[n_pts - 1];
  out.final_ensemble.ess = detail::effective_sample_size(weights);
  return out;
}

}  // namespace jdfilter
