#pragma once

// Partially observed jump-diffusion models with common jump times.
//
// A system is a pair (X, Y): X is the hidden signal, Y the observed
// jump-diffusion. Jumps of both components are driven by one finite marked
// Poisson measure; a mark carries a signal displacement and an observation
// displacement, either of which may be zero. Marks with nonzero observation
// displacement are what the filter sees; marks moving both components at once
// model common jump times.
//
// Two model families are provided:
//   * JumpDiffusionSystem    - scalar diffusion signal, affine coefficients;
//   * FiniteStateSignalModel - pure-jump signal on a finite state set, the
//     family the exact recursive solver operates on.
// Both expose the same marked-measure view, so the d-set / intensity /
// operator machinery below is written once against that view.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace jdfilter {

// ---------------------------------------------------------------------------
// Coefficient family: c0 + cx*x + cy*y. Constants are the degenerate case.
// Time-homogeneous by design; the eval signature keeps t for interface
// symmetry with the solvers.
struct Affine {
  double c0 = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  double operator()(double /*t*/, double x, double y) const { return c0 + cx * x + cy * y; }
  bool is_zero() const { return c0 == 0.0 && cx == 0.0 && cy == 0.0; }
  bool is_constant() const { return cx == 0.0 && cy == 0.0; }
};

// ---------------------------------------------------------------------------
// Marked Poisson measure with finite atomic intensity.

// A single mark: Poisson rate `weight` per unit time; on firing it displaces
// the signal by k0 and the observation by k1, both gated by an optional
// closed interval on the current signal value (outside the gate the mark has
// no effect).
struct Mark {
  std::string name;
  double weight = 0.0;
  double k0 = 0.0;
  double k1 = 0.0;
  bool gated = false;
  double gate_lo = 0.0;
  double gate_hi = 0.0;

  bool active(double x) const { return !gated || (x >= gate_lo && x <= gate_hi); }
  double signal_jump(double /*t*/, double x) const { return active(x) ? k0 : 0.0; }
  double observed_jump(double /*t*/, double x, double /*y*/) const { return active(x) ? k1 : 0.0; }
};

class MarkSpace {
 public:
  MarkSpace() = default;
  explicit MarkSpace(std::vector<Mark> marks) : marks_(std::move(marks)) {
    double total = 0.0;
    std::vector<std::string> names;
    for (const auto& m : marks_) {
      if (!(m.weight >= 0.0) || !std::isfinite(m.weight))
        throw std::invalid_argument("mark '" + m.name + "': weight must be finite and >= 0");
      names.push_back(m.name);
      total += m.weight;
    }
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
      throw std::invalid_argument("mark names must be unique");
    total_mass_ = total;
  }

  const std::vector<Mark>& marks() const { return marks_; }
  std::size_t size() const { return marks_.size(); }
  double total_mass() const { return total_mass_; }
  bool empty() const { return marks_.empty(); }

 private:
  std::vector<Mark> marks_;
  double total_mass_ = 0.0;
};

// Distinct nonzero observation jump sizes a mark space can produce. Sizes are
// model constants, so later size matching is exact equality on these values.
inline std::vector<double> admissible_sizes(const MarkSpace& marks) {
  std::vector<double> sizes;
  for (const auto& m : marks.marks())
    if (m.k1 != 0.0 && m.weight > 0.0) sizes.push_back(m.k1);
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  return sizes;
}

// ---------------------------------------------------------------------------
// Common view consumed by the generic operators and the path simulator.
struct MarkedSystemView {
  const MarkSpace* marks = nullptr;
  Affine b0;      // signal drift (zero for pure-jump signals)
  Affine sigma0;  // signal diffusion (zero for pure-jump signals)
  Affine b1;      // observation drift; finite-state models override per state
  Affine sigma1;  // observation diffusion, must stay > 0
  std::function<double(double, double, double)> b1_override;  // (t, x, y), optional
  std::vector<double> state_values;  // nonempty for finite-state signals
  double rho = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;
  double horizon = 0.0;

  bool require_positive_sigma0 = false;  // set for diffusive-signal systems

  double drift_b1(double t, double x, double y) const {
    return b1_override ? b1_override(t, x, y) : b1(t, x, y);
  }
  double diffusion_sigma1(double t, double y) const {
    const double s = sigma1(t, 0.0, y);
    if (!(s > 0.0)) throw std::runtime_error("sigma1 must be strictly positive");
    return s;
  }
  double diffusion_sigma0(double t, double x, double y) const {
    const double s = sigma0(t, x, y);
    if (require_positive_sigma0 && !(s > 0.0))
      throw std::runtime_error("sigma0 must be strictly positive");
    return s;
  }
};

// ---------------------------------------------------------------------------
// General scalar jump-diffusion system.
class JumpDiffusionSystem {
 public:
  JumpDiffusionSystem(Affine b0, Affine sigma0, Affine b1, Affine sigma1, double rho,
                      MarkSpace marks, double x0, double y0, double horizon)
      : b0_(b0),
        sigma0_(sigma0),
        b1_(b1),
        sigma1_(sigma1),
        rho_(rho),
        marks_(std::move(marks)),
        x0_(x0),
        y0_(y0),
        horizon_(horizon),
        sizes_(admissible_sizes(marks_)) {
    if (!(rho_ >= -1.0 && rho_ <= 1.0)) throw std::invalid_argument("rho must lie in [-1, 1]");
    if (!(horizon_ > 0.0)) throw std::invalid_argument("horizon must be > 0");
  }

  const MarkSpace& marks() const { return marks_; }
  const std::vector<double>& jump_sizes() const { return sizes_; }
  double x0() const { return x0_; }
  double y0() const { return y0_; }
  double horizon() const { return horizon_; }
  double rho() const { return rho_; }

  MarkedSystemView view() const {
    MarkedSystemView v;
    v.marks = &marks_;
    v.b0 = b0_;
    v.sigma0 = sigma0_;
    v.b1 = b1_;
    v.sigma1 = sigma1_;
    v.require_positive_sigma0 = true;
    v.rho = rho_;
    v.x0 = x0_;
    v.y0 = y0_;
    v.horizon = horizon_;
    return v;
  }

  bool has_diffusive_signal() const { return !sigma0_.is_zero(); }

 private:
  Affine b0_, sigma0_, b1_, sigma1_;
  double rho_;
  MarkSpace marks_;
  double x0_, y0_, horizon_;
  std::vector<double> sizes_;
};

// ---------------------------------------------------------------------------
// Pure-jump signal on a finite state set.
//
// States are real values (the signal lives on them), transitions u -> v occur
// at rate lambda0(u) * mu0(u, v). Each transition carries a fixed observation
// jump size; size 0 means the transition is invisible to the observer.
// Observation-only point processes (jumps of Y with the signal unchanged) are
// declared as extra marks with a per-state rate and a nonzero size.
struct ObservationOnlyMark {
  std::string name;
  Eigen::VectorXd rates;  // per state, >= 0
  double size = 0.0;      // nonzero
};

class FiniteStateSignalModel {
 public:
  FiniteStateSignalModel(Eigen::VectorXd states, std::vector<std::string> labels,
                         Eigen::VectorXd lambda0, Eigen::MatrixXd mu0, Eigen::MatrixXd obs_size,
                         std::vector<ObservationOnlyMark> extra_marks, Eigen::VectorXd b1_states,
                         Affine sigma1, double rho, int x0_index, Eigen::VectorXd prior, double y0,
                         double horizon)
      : states_(std::move(states)),
        labels_(std::move(labels)),
        lambda0_(std::move(lambda0)),
        mu0_(std::move(mu0)),
        obs_size_(std::move(obs_size)),
        extra_marks_(std::move(extra_marks)),
        b1_states_(std::move(b1_states)),
        sigma1_(sigma1),
        rho_(rho),
        x0_index_(x0_index),
        prior_(std::move(prior)),
        y0_(y0),
        horizon_(horizon) {
    validate();
    compile_marks();
    precompute();
  }

  int num_states() const { return static_cast<int>(states_.size()); }
  const Eigen::VectorXd& states() const { return states_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const Eigen::VectorXd& lambda0() const { return lambda0_; }
  const Eigen::MatrixXd& mu0() const { return mu0_; }
  const Eigen::MatrixXd& obs_size() const { return obs_size_; }
  const std::vector<ObservationOnlyMark>& extra_marks() const { return extra_marks_; }
  const Eigen::VectorXd& b1_states() const { return b1_states_; }
  const Affine& sigma1() const { return sigma1_; }
  double rho() const { return rho_; }
  int x0_index() const { return x0_index_; }
  double x0() const { return states_[x0_index_]; }
  const Eigen::VectorXd& prior() const { return prior_; }
  double y0() const { return y0_; }
  double horizon() const { return horizon_; }

  const MarkSpace& marks() const { return marks_; }
  const std::vector<double>& jump_sizes() const { return sizes_; }

  // Full signal generator matrix Q (zero row sums).
  const Eigen::MatrixXd& generator_matrix() const { return q_full_; }
  // Generator restricted to observation-silent transitions; diagonal holds
  // minus the silent outflow, so row sums equal -(observed transition rate).
  const Eigen::MatrixXd& silent_generator_matrix() const { return q_silent_; }
  // Total observed-jump intensity per state (common + observation-only).
  const Eigen::VectorXd& observed_intensity() const { return lambda_total_; }
  // Intensity of observed size-h jumps, split into common transitions
  // (matrix entry u,v) and signal-silent jumps (stay vector entry u).
  const Eigen::MatrixXd& common_jump_rates(double h) const { return size_data(h).common; }
  const Eigen::VectorXd& stay_jump_rates(double h) const { return size_data(h).stay; }
  const Eigen::VectorXd& observed_intensity_of_size(double h) const { return size_data(h).total; }
  // eta(R) for the unit-atom reference measure: one atom per admissible size.
  double eta_total_mass() const { return static_cast<double>(sizes_.size()); }
  // Drift matrix of the between-jump linear filter equation:
  //   eta(R) I + Qs^T - diag(lambda_total).
  const Eigen::MatrixXd& between_jump_matrix() const { return between_; }

  double sigma1_at(double t, double y) const {
    const double s = sigma1_(t, 0.0, y);
    if (!(s > 0.0)) throw std::runtime_error("sigma1 must be strictly positive");
    return s;
  }
  // b1/sigma1 per state at (t, y).
  Eigen::VectorXd drift_gain(double t, double y) const { return b1_states_ / sigma1_at(t, y); }

  int state_index(double x) const {
    for (int u = 0; u < num_states(); ++u)
      if (states_[u] == x) return u;
    throw std::invalid_argument("value is not a model state");
  }

  bool is_admissible_size(double z) const {
    return std::find(sizes_.begin(), sizes_.end(), z) != sizes_.end();
  }

  MarkedSystemView view() const {
    MarkedSystemView v;
    v.marks = &marks_;
    v.sigma1 = sigma1_;
    v.rho = rho_;
    v.x0 = x0();
    v.y0 = y0_;
    v.horizon = horizon_;
    v.b1_override = [this](double /*t*/, double x, double /*y*/) {
      return b1_states_[state_index(x)];
    };
    v.state_values.assign(states_.data(), states_.data() + states_.size());
    return v;
  }

 private:
  struct SizeData {
    Eigen::MatrixXd common;
    Eigen::VectorXd stay;
    Eigen::VectorXd total;
  };

  void validate() {
    const int n = num_states();
    if (n < 1) throw std::invalid_argument("model needs at least one state");
    if (static_cast<int>(labels_.size()) != n || lambda0_.size() != n || mu0_.rows() != n ||
        mu0_.cols() != n || obs_size_.rows() != n || obs_size_.cols() != n ||
        b1_states_.size() != n)
      throw std::invalid_argument("state-indexed fields must all have matching size");
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
        if (states_[u] == states_[v]) throw std::invalid_argument("state values must be distinct");
    for (int u = 0; u < n; ++u) {
      if (!(lambda0_[u] >= 0.0)) throw std::invalid_argument("lambda0 must be >= 0");
      if (mu0_(u, u) != 0.0) throw std::invalid_argument("mu0 diagonal must be 0");
      double row = 0.0;
      for (int v = 0; v < n; ++v) {
        if (mu0_(u, v) < 0.0) throw std::invalid_argument("mu0 entries must be >= 0");
        row += mu0_(u, v);
      }
      if (lambda0_[u] > 0.0 && std::abs(row - 1.0) > 1e-12)
        throw std::invalid_argument("mu0 rows must sum to 1 within 1e-12");
      if (obs_size_(u, u) != 0.0)
        throw std::invalid_argument("obs_size diagonal must be 0");
    }
    for (const auto& m : extra_marks_) {
      if (m.rates.size() != n)
        throw std::invalid_argument("observation mark '" + m.name + "': rates need one entry per state");
      if ((m.rates.array() < 0.0).any())
        throw std::invalid_argument("observation mark '" + m.name + "': rates must be >= 0");
      if (m.size == 0.0)
        throw std::invalid_argument("observation mark '" + m.name + "': jump size must be nonzero");
    }
    if (x0_index_ < 0 || x0_index_ >= n) throw std::invalid_argument("x0 must be a model state");
    if (prior_.size() == 0) {
      prior_ = Eigen::VectorXd::Zero(n);
      prior_[x0_index_] = 1.0;
    }
    if (prior_.size() != n || (prior_.array() < 0.0).any() ||
        std::abs(prior_.sum() - 1.0) > 1e-12)
      throw std::invalid_argument("prior must be a probability vector over the states");
    if (!(horizon_ > 0.0)) throw std::invalid_argument("horizon must be > 0");
    if (!(rho_ >= -1.0 && rho_ <= 1.0)) throw std::invalid_argument("rho must lie in [-1, 1]");
  }

  // Translate the tables into the marked-measure representation: one gated
  // mark per positive-rate transition, plus the declared observation-only
  // marks. A state-constant observation mark becomes a single ungated mark; a
  // state-dependent one is split into gated per-state marks so that thinning
  // by the gate reproduces the exact per-state rate.
  void compile_marks() {
    const int n = num_states();
    std::vector<Mark> out;
    const bool single_char =
        std::all_of(labels_.begin(), labels_.end(), [](const auto& s) { return s.size() == 1; });
    for (int u = 0; u < n; ++u) {
      for (int v = 0; v < n; ++v) {
        const double rate = lambda0_[u] * mu0_(u, v);
        if (rate <= 0.0) continue;
        Mark m;
        m.name = single_char ? "s" + labels_[u] + labels_[v] : "s" + labels_[u] + "_" + labels_[v];
        m.weight = rate;
        m.k0 = states_[v] - states_[u];
        m.k1 = obs_size_(u, v);
        m.gated = true;
        m.gate_lo = m.gate_hi = states_[u];
        out.push_back(m);
      }
    }
    for (const auto& em : extra_marks_) {
      const double r0 = em.rates[0];
      if ((em.rates.array() == r0).all()) {
        if (r0 <= 0.0) continue;
        Mark m;
        m.name = em.name;
        m.weight = r0;
        m.k1 = em.size;
        out.push_back(m);
      } else {
        int active = 0;
        for (int u = 0; u < n; ++u)
          if (em.rates[u] > 0.0) ++active;
        for (int u = 0; u < n; ++u) {
          if (em.rates[u] <= 0.0) continue;
          Mark m;
          m.name = active == 1 ? em.name : em.name + "@" + labels_[u];
          m.weight = em.rates[u];
          m.k1 = em.size;
          m.gated = true;
          m.gate_lo = m.gate_hi = states_[u];
          out.push_back(m);
        }
      }
    }
    marks_ = MarkSpace(std::move(out));
    sizes_ = admissible_sizes(marks_);
  }

  void precompute() {
    const int n = num_states();
    q_full_ = Eigen::MatrixXd::Zero(n, n);
    q_silent_ = Eigen::MatrixXd::Zero(n, n);
    lambda_total_ = Eigen::VectorXd::Zero(n);
    for (int u = 0; u < n; ++u) {
      for (int v = 0; v < n; ++v) {
        if (v == u) continue;
        const double rate = lambda0_[u] * mu0_(u, v);
        q_full_(u, v) = rate;
        q_full_(u, u) -= rate;
        if (obs_size_(u, v) == 0.0) {
          q_silent_(u, v) = rate;
          q_silent_(u, u) -= rate;
        } else {
          lambda_total_[u] += rate;
        }
      }
      for (const auto& em : extra_marks_) lambda_total_[u] += em.rates[u];
    }
    for (double h : sizes_) {
      SizeData d;
      d.common = Eigen::MatrixXd::Zero(n, n);
      d.stay = Eigen::VectorXd::Zero(n);
      for (int u = 0; u < n; ++u) {
        for (int v = 0; v < n; ++v)
          if (v != u && obs_size_(u, v) == h) d.common(u, v) = lambda0_[u] * mu0_(u, v);
        for (const auto& em : extra_marks_)
          if (em.size == h) d.stay[u] += em.rates[u];
      }
      d.total = d.stay + d.common.rowwise().sum();
      by_size_.emplace(h, std::move(d));
    }
    between_ = eta_total_mass() * Eigen::MatrixXd::Identity(n, n) + q_silent_.transpose();
    between_.diagonal() -= lambda_total_;
  }

  const SizeData& size_data(double h) const {
    auto it = by_size_.find(h);
    if (it == by_size_.end())
      throw std::invalid_argument("jump size is not in the admissible size set");
    return it->second;
  }

  Eigen::VectorXd states_;
  std::vector<std::string> labels_;
  Eigen::VectorXd lambda0_;
  Eigen::MatrixXd mu0_;
  Eigen::MatrixXd obs_size_;
  std::vector<ObservationOnlyMark> extra_marks_;
  Eigen::VectorXd b1_states_;
  Affine sigma1_;
  double rho_;
  int x0_index_;
  Eigen::VectorXd prior_;
  double y0_;
  double horizon_;

  MarkSpace marks_;
  std::vector<double> sizes_;
  Eigen::MatrixXd q_full_, q_silent_, between_;
  Eigen::VectorXd lambda_total_;
  std::map<double, SizeData> by_size_;
};

// ---------------------------------------------------------------------------
// d-sets and local characteristics.

// Marks whose observation jump size at (t, x, y) falls in `sizes` (zero
// excluded by construction). Returns mark indices in declaration order.
template <class ModelT>
std::vector<std::size_t> d_set(const ModelT& model, double t, double x, double y,
                               const std::vector<double>& sizes) {
  for (double a : sizes)
    if (a == 0.0) throw std::invalid_argument("d_set: target size set must not contain 0");
  std::vector<std::size_t> out;
  const auto& marks = model.marks().marks();
  for (std::size_t i = 0; i < marks.size(); ++i) {
    const double k1 = marks[i].observed_jump(t, x, y);
    if (k1 == 0.0) continue;
    if (std::find(sizes.begin(), sizes.end(), k1) != sizes.end()) out.push_back(i);
  }
  return out;
}

// d1: every mark producing an observed jump at (t, x, y).
template <class ModelT>
std::vector<std::size_t> observed_jump_marks(const ModelT& model, double t, double x, double y) {
  std::vector<std::size_t> out;
  const auto& marks = model.marks().marks();
  for (std::size_t i = 0; i < marks.size(); ++i)
    if (marks[i].observed_jump(t, x, y) != 0.0) out.push_back(i);
  return out;
}

// d0: every mark displacing the signal at (t, x).
template <class ModelT>
std::vector<std::size_t> signal_jump_marks(const ModelT& model, double t, double x) {
  std::vector<std::size_t> out;
  const auto& marks = model.marks().marks();
  for (std::size_t i = 0; i < marks.size(); ++i)
    if (marks[i].signal_jump(t, x) != 0.0) out.push_back(i);
  return out;
}

// Total observed-jump intensity and the size distribution it induces.
struct LocalCharacteristics {
  double lambda = 0.0;
  std::vector<std::pair<double, double>> phi;  // (size, probability), sizes ascending
};

template <class ModelT>
LocalCharacteristics local_characteristics(const ModelT& model, double t, double x, double y) {
  std::map<double, double> mass;
  double lambda = 0.0;
  for (const auto& m : model.marks().marks()) {
    const double k1 = m.observed_jump(t, x, y);
    if (k1 == 0.0 || m.weight == 0.0) continue;
    mass[k1] += m.weight;
    lambda += m.weight;
  }
  LocalCharacteristics lc;
  lc.lambda = lambda;
  if (lambda > 0.0)
    for (const auto& [h, w] : mass) lc.phi.emplace_back(h, w / lambda);
  return lc;
}

// ---------------------------------------------------------------------------
// Operators on test functions. A test function carries its own derivatives;
// the jump operators only evaluate f itself.
struct TestFunction {
  std::function<double(double, double)> f;
  std::function<double(double, double)> df_dt = [](double, double) { return 0.0; };
  std::function<double(double, double)> df_dx = [](double, double) { return 0.0; };
  std::function<double(double, double)> d2f_dx2 = [](double, double) { return 0.0; };
};

// Generator of the signal: time derivative + diffusion part + jump part over
// all marks. For pure-jump finite-state models the diffusion part vanishes
// and the mark sum reduces to the discrete transition-rate form.
template <class ModelT>
double generator_apply(const ModelT& model, const TestFunction& f, double t, double x) {
  const MarkedSystemView v = model.view();
  double out = f.df_dt(t, x);
  out += v.b0(t, x, 0.0) * f.df_dx(t, x);
  const double s0 = v.sigma0(t, x, 0.0);
  out += 0.5 * s0 * s0 * f.d2f_dx2(t, x);
  for (const auto& m : model.marks().marks()) {
    const double k0 = m.signal_jump(t, x);
    // Gated-off marks contribute nothing: both displacements vanish.
    if (!m.active(x)) continue;
    out += (f.f(t, x + k0) - f.f(t, x)) * m.weight;
  }
  return out;
}

// Common-jump operator at observed size h: jump contributions restricted to
// marks that would produce an observed jump of exactly that size.
template <class ModelT>
double common_jump_operator(const ModelT& model, const TestFunction& f, double t, double x,
                            double y, double h) {
  double out = 0.0;
  for (const auto& m : model.marks().marks()) {
    if (m.observed_jump(t, x, y) != h || h == 0.0) continue;
    out += (f.f(t, x + m.signal_jump(t, x)) - f.f(t, x)) * m.weight;
  }
  return out;
}

// Generator with the jump sum restricted to observation-silent marks.
template <class ModelT>
double restricted_generator_apply(const ModelT& model, const TestFunction& f, double t, double x,
                                  double y) {
  const MarkedSystemView v = model.view();
  double out = f.df_dt(t, x);
  out += v.b0(t, x, 0.0) * f.df_dx(t, x);
  const double s0 = v.sigma0(t, x, 0.0);
  out += 0.5 * s0 * s0 * f.d2f_dx2(t, x);
  for (const auto& m : model.marks().marks()) {
    if (!m.active(x)) continue;
    if (m.observed_jump(t, x, y) != 0.0) continue;
    out += (f.f(t, x + m.signal_jump(t, x)) - f.f(t, x)) * m.weight;
  }
  return out;
}

// Reference jump-size measure: one unit atom per admissible size. Its total
// mass is |H|; an empty measure is valid exactly when the model produces no
// observed jumps at all.
template <class ModelT>
std::vector<std::pair<double, double>> eta_measure(const ModelT& model) {
  std::vector<std::pair<double, double>> atoms;
  for (double h : model.jump_sizes()) atoms.emplace_back(h, 1.0);
  return atoms;
}

}  // namespace jdfilter
