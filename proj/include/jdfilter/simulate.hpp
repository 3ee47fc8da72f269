#pragma once

// Joint simulation of (X, Y) under the physical measure.
//
// The diffusion parts move by Euler-Maruyama; jumps come from one exponential
// clock per mark (the marked measure has constant atom intensities, so clocks
// are homogeneous and exact). When a clock fires, the displacement kernels
// evaluated at the left limit decide what actually happens: either component
// may receive zero displacement, which is how state-gated marks thin
// themselves. Observed jump times are inserted into the recorded grid so the
// left limits the filter equations need are represented exactly; fires that
// move nothing observable are internal events only.

#include "jdfilter/model.hpp"
#include "jdfilter/path.hpp"
#include "jdfilter/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace jdfilter {

// Guard against runaway configurations before spending time in the loop.
inline constexpr double kMaxExpectedJumps = 1e6;

namespace detail {

template <class ModelT>
double draw_initial_state(const ModelT& model, Rng& rng);

inline double draw_initial_state_from_prior(const Eigen::VectorXd& prior,
                                            const Eigen::VectorXd& states, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < prior.size(); ++i) {
    acc += prior[i];
    if (u < acc) return states[i];
  }
  return states[states.size() - 1];
}

template <>
inline double draw_initial_state<JumpDiffusionSystem>(const JumpDiffusionSystem& model, Rng&) {
  return model.x0();
}

template <>
inline double draw_initial_state<FiniteStateSignalModel>(const FiniteStateSignalModel& model,
                                                         Rng& rng) {
  return draw_initial_state_from_prior(model.prior(), model.states(), rng);
}

}  // namespace detail

template <class ModelT>
JointPath simulate_path(const ModelT& model, double dt, std::uint64_t seed) {
  const MarkedSystemView v = model.view();
  const double horizon = v.horizon;
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_path: dt must be > 0");
  if (dt > horizon) throw std::invalid_argument("simulate_path: dt must not exceed the horizon");
  if (model.marks().total_mass() * horizon > kMaxExpectedJumps)
    throw std::invalid_argument("simulate_path: expected jump count exceeds the configured cap");

  Rng rng(seed);

  double x = detail::draw_initial_state(model, rng);
  double y = v.y0;
  double t = 0.0;

  const auto& marks = model.marks().marks();
  std::vector<double> clock(marks.size());
  for (std::size_t i = 0; i < marks.size(); ++i) clock[i] = rng.exponential(marks[i].weight);

  std::vector<double> ts{0.0}, xs{x}, ys{y}, w0s, w1s;
  std::vector<JointPath::Jump> jumps;

  const double corr = v.rho;
  const double corr_perp = std::sqrt(std::max(0.0, 1.0 - corr * corr));
  double acc_w0 = 0.0, acc_w1 = 0.0;

  const auto flush_point = [&](double time) {
    if (!ts.empty() && ts.back() == time) {
      // Clock fired exactly on an existing grid point; merge instead of
      // recording a duplicate time.
      xs.back() = x;
      ys.back() = y;
      return;
    }
    ts.push_back(time);
    xs.push_back(x);
    ys.push_back(y);
    w0s.push_back(acc_w0);
    w1s.push_back(acc_w1);
    acc_w0 = acc_w1 = 0.0;
  };

  std::int64_t k = 1;  // next uniform grid index
  double next_grid = std::min(dt, horizon);
  while (true) {
    // Next event: earliest mark clock or the next grid point.
    std::size_t fire = marks.size();
    double t_fire = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < marks.size(); ++i) {
      if (clock[i] < t_fire) {
        t_fire = clock[i];
        fire = i;
      }
    }
    const bool grid_event = next_grid <= t_fire;
    const double t_next = grid_event ? next_grid : t_fire;

    // Euler step of the diffusion parts up to the event, left-point
    // coefficients, correlated Brownian increments.
    const double h = t_next - t;
    if (h > 0.0) {
      const double dw0 = std::sqrt(h) * rng.normal();
      const double dwp = std::sqrt(h) * rng.normal();
      const double dw1 = corr * dw0 + corr_perp * dwp;
      const double bx = v.b0(t, x, y);
      const double sx = v.diffusion_sigma0(t, x, y);
      const double by = v.drift_b1(t, x, y);
      const double sy = v.diffusion_sigma1(t, y);
      x += bx * h + sx * dw0;
      y += by * h + sy * dw1;
      acc_w0 += dw0;
      acc_w1 += dw1;
    }
    t = t_next;

    if (grid_event) {
      flush_point(t);
      if (t >= horizon) break;
      ++k;
      next_grid = std::min(static_cast<double>(k) * dt, horizon);
    } else {
      const Mark& m = marks[fire];
      const double jump_x = m.signal_jump(t, x);
      const double jump_y = m.observed_jump(t, x, y);
      x += jump_x;
      y += jump_y;
      clock[fire] = t + rng.exponential(m.weight);
      if (jump_y != 0.0) {
        flush_point(t);
        jumps.push_back({static_cast<std::ptrdiff_t>(ts.size()) - 1, t, jump_y, m.name});
      }
    }
  }

  JointPath path;
  path.t = Eigen::Map<Eigen::VectorXd>(ts.data(), static_cast<Eigen::Index>(ts.size()));
  path.x = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  path.y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  path.w0 = Eigen::Map<Eigen::VectorXd>(w0s.data(), static_cast<Eigen::Index>(w0s.size()));
  path.w1 = Eigen::Map<Eigen::VectorXd>(w1s.data(), static_cast<Eigen::Index>(w1s.size()));
  path.jumps = std::move(jumps);
  return path;
}

// Increments of the reference Brownian motion: the observation increment with
// the jumps removed, scaled by 1/sigma1 at the left grid point. Discretely
// this equals the simulator's Brownian increment plus (b1/sigma1) dt.
template <class ModelT>
Eigen::VectorXd reconstruct_wtilde(const ModelT& model, const ObservationPath& obs) {
  const MarkedSystemView v = model.view();
  const Eigen::Index n = obs.t.size();
  Eigen::VectorXd wt(n > 0 ? n - 1 : 0);
  std::vector<double> jump_at(static_cast<std::size_t>(n), 0.0);
  for (const auto& j : obs.jumps) jump_at[static_cast<std::size_t>(j.grid_index)] += j.size;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double s = v.diffusion_sigma1(obs.t[i], obs.y[i]);
    wt[i] = (obs.y[i + 1] - obs.y[i] - jump_at[static_cast<std::size_t>(i + 1)]) / s;
  }
  return wt;
}

template <class ModelT>
ObservationPath extract_observation(const ModelT& model, const JointPath& path) {
  ObservationPath obs;
  obs.t = path.t;
  obs.y = path.y;
  obs.jumps.reserve(path.jumps.size());
  for (const auto& j : path.jumps) obs.jumps.push_back({j.grid_index, j.time, j.size});
  obs.wtilde = reconstruct_wtilde(model, obs);
  return obs;
}

// Keep every `factor`-th regular point plus all jump points; used by the
// step-halving convergence studies so both resolutions share one realization.
template <class ModelT>
ObservationPath coarsen_observation(const ModelT& model, const ObservationPath& obs, int factor) {
  if (factor < 1) throw std::invalid_argument("coarsen_observation: factor must be >= 1");
  const Eigen::Index n = obs.t.size();
  std::vector<char> is_jump(static_cast<std::size_t>(n), 0);
  for (const auto& j : obs.jumps) is_jump[static_cast<std::size_t>(j.grid_index)] = 1;

  std::vector<Eigen::Index> keep;
  int regular_rank = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (is_jump[static_cast<std::size_t>(i)]) {
      keep.push_back(i);
    } else {
      if (regular_rank % factor == 0 || i == n - 1) keep.push_back(i);
      ++regular_rank;
    }
  }

  ObservationPath out;
  out.t.resize(static_cast<Eigen::Index>(keep.size()));
  out.y.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.t[static_cast<Eigen::Index>(k)] = obs.t[keep[k]];
    out.y[static_cast<Eigen::Index>(k)] = obs.y[keep[k]];
  }
  for (const auto& j : obs.jumps) {
    const auto it = std::find(keep.begin(), keep.end(), j.grid_index);
    out.jumps.push_back({it - keep.begin(), j.time, j.size});
  }
  out.wtilde = reconstruct_wtilde(model, out);
  return out;
}

// Lossless CSV round trip for observation paths; declared here, defined in
// obs_io.cpp. `base` names the sample file; the jump table goes to
// `<base>_jumps.csv` alongside it.
void save_observation(const ObservationPath& obs, const std::string& base_path,
                      const std::string& manifest_line = "");
ObservationPath load_observation(const std::string& base_path);

}  // namespace jdfilter
