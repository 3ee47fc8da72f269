#pragma once

// Sampling-based audit of the well-posedness conditions on the model
// coefficients: linear growth and local Lipschitz bounds. It spot-checks the
// inequalities on randomly sampled points and reports the worst observed
// ratio with a witness; it is a lint, never a proof.

#include "jdfilter/model.hpp"
#include "jdfilter/rng.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace jdfilter {

struct SampleBox {
  double x_lo = -1.0, x_hi = 1.0;
  double y_lo = -1.0, y_hi = 1.0;
};

struct ConditionReport {
  std::string name;
  double worst_ratio = 0.0;
  double witness_x = 0.0;
  double witness_y = 0.0;
  bool pass = true;
};

struct AssumptionReport {
  std::vector<ConditionReport> conditions;
  bool all_pass = true;
};

// The lint works on plain coefficient callables so it can audit anything,
// including coefficients outside the built-in families.
struct CoefficientSet {
  std::function<double(double, double, double)> b0 = [](double, double, double) { return 0.0; };
  std::function<double(double, double, double)> sigma0 = [](double, double, double) { return 0.0; };
  std::function<double(double, double, double)> b1 = [](double, double, double) { return 0.0; };
  std::function<double(double, double)> sigma1 = [](double, double) { return 1.0; };
  const MarkSpace* marks = nullptr;
  std::vector<double> state_values;  // nonempty: sample x from these instead of the box
  double horizon = 1.0;
};

template <class ModelT>
CoefficientSet coefficients_of(const ModelT& model) {
  const MarkedSystemView v = model.view();
  CoefficientSet c;
  c.b0 = [v](double t, double x, double y) { return v.b0(t, x, y); };
  c.sigma0 = [v](double t, double x, double y) { return v.sigma0(t, x, y); };
  c.b1 = [v](double t, double x, double y) { return v.drift_b1(t, x, y); };
  c.sigma1 = [v](double t, double y) { return v.sigma1(t, 0.0, y); };
  c.marks = &model.marks();
  c.state_values = v.state_values;
  c.horizon = v.horizon;
  return c;
}

namespace detail {

inline void track(ConditionReport& r, double ratio, double x, double y) {
  if (ratio > r.worst_ratio) {
    r.worst_ratio = ratio;
    r.witness_x = x;
    r.witness_y = y;
  }
}

}  // namespace detail

// growth_c bounds the squared-growth ratios |coef|^2 / (1 + |x|^2 [+ |y|^2]),
// lipschitz_l bounds difference quotients on sampled pairs. Both constants
// are the caller's choice; the report compares observed suprema against them.
inline AssumptionReport validate_assumptions(const CoefficientSet& coef, SampleBox box,
                                             int n_samples, std::uint64_t seed, double growth_c,
                                             double lipschitz_l) {
  if (n_samples < 1) throw std::invalid_argument("validate_assumptions: n_samples must be >= 1");
  Rng rng(seed);

  ConditionReport g_b0{"growth.b0"}, g_s0{"growth.sigma0"}, g_b1{"growth.b1"},
      g_s1{"growth.sigma1"}, g_k0{"growth.k0"}, g_k1{"growth.k1"};
  ConditionReport l_b0{"lipschitz.b0"}, l_s0{"lipschitz.sigma0"}, l_b1{"lipschitz.b1"},
      l_s1{"lipschitz.sigma1"};

  const auto draw_x = [&]() {
    if (coef.state_values.empty()) return box.x_lo + rng.uniform() * (box.x_hi - box.x_lo);
    const std::size_t k = static_cast<std::size_t>(rng.uniform() * coef.state_values.size());
    return coef.state_values[std::min(k, coef.state_values.size() - 1)];
  };

  for (int i = 0; i < n_samples; ++i) {
    const double t = rng.uniform() * coef.horizon;
    const double x = draw_x();
    const double y = box.y_lo + rng.uniform() * (box.y_hi - box.y_lo);
    const double dx2 = 1.0 + x * x;
    const double dxy2 = 1.0 + x * x + y * y;
    const double dy2 = 1.0 + y * y;

    const double b0 = coef.b0(t, x, y), s0 = coef.sigma0(t, x, y);
    const double b1 = coef.b1(t, x, y), s1 = coef.sigma1(t, y);
    detail::track(g_b0, b0 * b0 / dx2, x, y);
    detail::track(g_s0, s0 * s0 / dx2, x, y);
    detail::track(g_b1, b1 * b1 / dxy2, x, y);
    detail::track(g_s1, s1 * s1 / dy2, x, y);

    if (coef.marks) {
      double k0sq = 0.0, k1sq = 0.0;
      for (const auto& m : coef.marks->marks()) {
        const double k0 = m.signal_jump(t, x);
        const double k1 = m.observed_jump(t, x, y);
        k0sq += k0 * k0 * m.weight;
        k1sq += k1 * k1 * m.weight;
      }
      detail::track(g_k0, k0sq / dx2, x, y);
      detail::track(g_k1, k1sq / dxy2, x, y);
    }

    // Lipschitz quotients on a second sampled point.
    const double xp = draw_x();
    const double yp = box.y_lo + rng.uniform() * (box.y_hi - box.y_lo);
    const double ddx = std::abs(x - xp), ddy = std::abs(y - yp);
    if (ddx > 1e-12) {
      detail::track(l_b0, std::abs(coef.b0(t, x, y) - coef.b0(t, xp, y)) / ddx, x, y);
      detail::track(l_s0, std::abs(coef.sigma0(t, x, y) - coef.sigma0(t, xp, y)) / ddx, x, y);
    }
    if (ddx + ddy > 1e-12)
      detail::track(l_b1, std::abs(coef.b1(t, x, y) - coef.b1(t, xp, yp)) / (ddx + ddy), x, y);
    if (ddy > 1e-12)
      detail::track(l_s1, std::abs(coef.sigma1(t, y) - coef.sigma1(t, yp)) / ddy, x, y);
  }

  AssumptionReport report;
  for (auto* r : {&g_b0, &g_s0, &g_b1, &g_s1, &g_k0, &g_k1}) {
    r->pass = r->worst_ratio <= growth_c;
    report.all_pass = report.all_pass && r->pass;
    report.conditions.push_back(*r);
  }
  for (auto* r : {&l_b0, &l_s0, &l_b1, &l_s1}) {
    r->pass = r->worst_ratio <= lipschitz_l;
    report.all_pass = report.all_pass && r->pass;
    report.conditions.push_back(*r);
  }
  return report;
}

template <class ModelT>
AssumptionReport validate_assumptions(const ModelT& model, SampleBox box, int n_samples,
                                      std::uint64_t seed, double growth_c, double lipschitz_l) {
  return validate_assumptions(coefficients_of(model), box, n_samples, seed, growth_c, lipschitz_l);
}

}  // namespace jdfilter
