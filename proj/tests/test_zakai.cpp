#include "jdfilter/zakai.hpp"

#include "jdfilter/grid_bayes.hpp"
#include "jdfilter/ks.hpp"
#include "jdfilter/simulate.hpp"
#include "support/desk_models.hpp"
#include "support/fraction.hpp"
#include "support/ode_oracle.hpp"

#include <doctest.h>

#include <cmath>

using namespace jdfilter;
using namespace jdfilter::testing;

namespace {

ObservationPath make_obs(std::vector<double> ts, std::vector<double> ys,
                         std::vector<ObservedJump> jumps = {}) {
  ObservationPath obs;
  obs.t = Eigen::Map<Eigen::VectorXd>(ts.data(), static_cast<Eigen::Index>(ts.size()));
  obs.y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  obs.jumps = std::move(jumps);
  return obs;
}

// Uniform jump-free grid with flat observations.
ObservationPath flat_obs(double horizon, int n_steps) {
  std::vector<double> ts(static_cast<std::size_t>(n_steps) + 1),
      ys(static_cast<std::size_t>(n_steps) + 1, 0.0);
  for (int i = 0; i <= n_steps; ++i) ts[static_cast<std::size_t>(i)] = horizon * i / n_steps;
  return make_obs(std::move(ts), std::move(ys));
}

FiniteStateSignalModel with_rho(const FiniteStateSignalModel& m, double rho) {
  return FiniteStateSignalModel(m.states(), m.labels(), m.lambda0(), m.mu0(), m.obs_size(),
                                m.extra_marks(), m.b1_states(), m.sigma1(), rho, m.x0_index(),
                                m.prior(), m.y0(), m.horizon());
}

}  // namespace

TEST_CASE("one explicit Euler step of the between-jump equation") {
  const auto model = desk_a();
  UnnormalizedFilterState state;
  state.probs = Eigen::Vector2d(0.5, 0.5);  // V = (1, 1) with mass 2
  state.log_mass = std::log(2.0);
  state.t = 0.0;

  ObservationPath obs = make_obs({0.0, 0.01}, {0.0, 0.0});
  obs.wtilde = Eigen::VectorXd::Zero(1);

  const auto next = zakai_between_jumps(model, state, obs, 0, 1);
  const Eigen::Vector2d v = std::exp(next.log_mass) * next.probs;
  CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.98).epsilon(1e-12));
  CHECK(next.t == 0.01);
}

TEST_CASE("zero-length segment leaves the state unchanged") {
  const auto model = desk_a();
  UnnormalizedFilterState state;
  state.probs = Eigen::Vector2d(0.3, 0.7);
  state.log_mass = 0.25;
  state.t = 0.4;
  ObservationPath obs = make_obs({0.4, 0.5}, {0.0, 0.1});
  obs.wtilde = Eigen::VectorXd::Constant(1, 0.1);
  const auto same = zakai_between_jumps(model, state, obs, 0, 0);
  CHECK(same.probs == state.probs);
  CHECK(same.log_mass == state.log_mass);
  CHECK(same.t == state.t);
}

TEST_CASE("jump updates on the desk models") {
  SUBCASE("observation-only intensities reweight by 1 and 3") {
    const auto model = desk_a();
    UnnormalizedFilterState state{Eigen::Vector2d(0.5, 0.5), 0.0, 0.2};
    const auto next = zakai_jump_update(model, state, 0.2, 1.0);
    const Eigen::Vector2d v = std::exp(next.log_mass) * next.probs;
    CHECK(v[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(next.probs[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(next.probs[1] == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("pure common jumps swap the masses") {
    const auto model = desk_b();
    UnnormalizedFilterState state{Eigen::Vector2d(0.3, 0.7), 0.0, 0.2};
    const auto next = zakai_jump_update(model, state, 0.2, 1.0);
    CHECK(next.probs[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(next.probs[1] == doctest::Approx(0.3).epsilon(1e-15));
  }
  SUBCASE("degenerate mass moves deterministically") {
    const auto model = desk_b();
    UnnormalizedFilterState state{Eigen::Vector2d(1.0, 0.0), 0.0, 0.2};
    const auto next = zakai_jump_update(model, state, 0.2, 1.0);
    CHECK(next.probs[0] == 0.0);
    CHECK(next.probs[1] == 1.0);
  }
  SUBCASE("inadmissible and impossible sizes fail loudly") {
    const auto model = desk_a();
    UnnormalizedFilterState state{Eigen::Vector2d(0.5, 0.5), 0.0, 0.2};
    CHECK_THROWS_AS(zakai_jump_update(model, state, 0.2, 2.0), std::invalid_argument);

    // Size-1 jumps only from state 1, but the filter sits entirely on state 0.
    ObservationOnlyMark only_from_1{"o", (Eigen::VectorXd(2) << 0.0, 1.0).finished(), 1.0};
    FiniteStateSignalModel impossible(
        (Eigen::VectorXd(2) << 0.0, 1.0).finished(), {"0", "1"}, Eigen::VectorXd::Zero(2),
        Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2), {only_from_1},
        Eigen::VectorXd::Zero(2), Affine{1, 0, 0}, 0.0, 0, Eigen::VectorXd(), 0.0, 1.0);
    UnnormalizedFilterState point{Eigen::Vector2d(1.0, 0.0), 0.0, 0.2};
    CHECK_THROWS_AS(zakai_jump_update(impossible, point, 0.2, 1.0), std::runtime_error);
  }
}

TEST_CASE("transient negative weights are clamped inside the tolerance, fatal beyond") {
  // On desk model A from the point mass on state 1, one Euler step gives
  // V'(1) = 1 - 3 dt + dW; drive it just below zero.
  const auto model = desk_a();
  const double dt = 0.01;
  UnnormalizedFilterState state{Eigen::Vector2d(0.0, 1.0), 0.0, 0.0};

  ObservationPath obs = make_obs({0.0, dt}, {0.0, 0.0});
  obs.wtilde = Eigen::VectorXd::Constant(1, -(1.0 - 3.0 * dt) - 5e-10);
  SolverDiagnostics diag;
  const auto next = zakai_between_jumps(model, state, obs, 0, 1, &diag);
  CHECK(diag.negative_clamps == 1);
  CHECK(next.probs[1] == 0.0);
  CHECK(next.probs[0] == 1.0);
  CHECK(std::exp(next.log_mass) == doctest::Approx(dt).epsilon(1e-9));

  obs.wtilde = Eigen::VectorXd::Constant(1, -(1.0 - 3.0 * dt) - 1e-7);
  CHECK_THROWS_WITH_AS(zakai_between_jumps(model, state, obs, 0, 1, &diag),
                       doctest::Contains("negative beyond tolerance"), std::runtime_error);
}

TEST_CASE("without information the filter solves the forward equation") {
  // Closed form for the symmetric chain started in state 0, and an
  // independent RK4 integration of the master equation.
  const auto model = desk_a_noinfo();
  const ObservationPath obs = flat_obs(1.0, 10000);
  const auto zakai = run_zakai(model, obs);
  const auto ks = run_ks(model, obs);

  const Eigen::Index last = zakai.filter.rows() - 1;
  const double stay = two_state_stay_probability(1.0);
  CHECK(stay == doctest::Approx(0.5676676416).epsilon(1e-9));
  CHECK(std::abs(zakai.filter.probs(last, 0) - stay) < 1e-3);
  CHECK(std::abs(ks.filter.probs(last, 0) - stay) < 1e-3);

  const Eigen::VectorXd rk4 =
      forward_equation_rk4(model.generator_matrix(), model.prior(), 1.0, 2000);
  CHECK(std::abs(zakai.filter.probs(last, 0) - rk4[0]) < 1e-3);

  // Mid-horizon checkpoint against the closed form.
  const Eigen::Index mid = 5000;
  CHECK(zakai.filter.t[mid] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(zakai.filter.probs(mid, 0) - two_state_stay_probability(0.5)) < 1e-3);
}

TEST_CASE("state-independent jump intensity on a jump-free path is uninformative") {
  const auto model = desk_a_uninformative();
  const ObservationPath obs = flat_obs(1.0, 10000);
  const auto zakai = run_zakai(model, obs);
  const Eigen::Index last = zakai.filter.rows() - 1;
  CHECK(std::abs(zakai.filter.probs(last, 0) - two_state_stay_probability(1.0)) < 1e-3);
}

TEST_CASE("run_zakai starts from the point-mass prior and keeps rows normalized") {
  const auto model = desk_a();
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    const ObservationPath obs = extract_observation(model, simulate_path(model, 1e-3, seed));
    const auto zakai = run_zakai(model, obs);
    CHECK(zakai.filter.probs(0, 0) == 1.0);  // x0 = state 0
    CHECK(zakai.filter.probs(0, 1) == 0.0);
    for (Eigen::Index i = 0; i < zakai.filter.rows(); ++i) {
      CHECK(std::abs(zakai.filter.probs.row(i).sum() - 1.0) <= 1e-12);
      CHECK(zakai.filter.probs.row(i).minCoeff() >= 0.0);
      CHECK(std::isfinite(zakai.unnormalized.log_mass[i]));
    }
    CHECK(zakai.diagnostics.negative_clamps == 0);
  }
}

TEST_CASE("zakai agrees with the grid-Bayes oracle at dt = 1e-3") {
  for (const auto& model : {desk_a(), desk_b()}) {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      const ObservationPath obs = extract_observation(model, simulate_path(model, 1e-3, seed));
      const auto zakai = run_zakai(model, obs);
      const auto grid = grid_bayes_filter(model, obs);
      CHECK(sup_l1_distance(zakai.filter, grid) <= 0.05);
    }
  }
}

TEST_CASE("zakai and ks agree pathwise at dt = 1e-3") {
  for (const auto& model : {desk_a(), desk_b()}) {
    for (std::uint64_t seed : {21ull, 22ull, 23ull}) {
      const ObservationPath obs = extract_observation(model, simulate_path(model, 1e-3, seed));
      const auto zakai = run_zakai(model, obs);
      const auto ks = run_ks(model, obs);
      CHECK(sup_l1_distance(zakai.filter, ks.filter) <= 0.05);
    }
  }
}

TEST_CASE("ks jump update is plain Bayes on the desk example") {
  const auto model = desk_a();
  ObservationPath obs = make_obs({0.0, 0.01}, {0.0, 1.0}, {{1, 0.01, 1.0}});
  obs.wtilde = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd prior(2);
  prior << 0.5, 0.5;
  const auto ks = run_ks(model, obs, prior);
  const Eigen::Index last = ks.filter.rows() - 1;
  CHECK(ks.filter.post_jump[static_cast<std::size_t>(last)] == 1);
  // One tiny drift step barely moves the prior; the jump dominates.
  CHECK(ks.filter.probs(last, 0) == doctest::Approx(0.25).epsilon(2e-2));
  CHECK(ks.filter.probs(last, 1) == doctest::Approx(0.75).epsilon(2e-2));
}

TEST_CASE("correlation gain is identically zero for finite-state signals") {
  const auto base = desk_a();
  const auto tilted = with_rho(base, 0.7);
  const ObservationPath obs = extract_observation(base, simulate_path(base, 1e-3, 31));
  const auto ks0 = run_ks(base, obs);
  const auto ks7 = run_ks(tilted, obs);
  CHECK((ks0.filter.probs.array() == ks7.filter.probs.array()).all());
}

TEST_CASE("ks flags observed jumps the filter deems impossible instead of failing") {
  ObservationOnlyMark only_from_1{"o", (Eigen::VectorXd(2) << 0.0, 1.0).finished(), 1.0};
  FiniteStateSignalModel model(
      (Eigen::VectorXd(2) << 0.0, 1.0).finished(), {"0", "1"}, Eigen::VectorXd::Zero(2),
      Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2), {only_from_1},
      Eigen::VectorXd::Zero(2), Affine{1, 0, 0}, 0.0, 0, Eigen::VectorXd(), 0.0, 1.0);
  ObservationPath obs = make_obs({0.0, 0.5, 1.0}, {0.0, 1.0, 1.0}, {{1, 0.5, 1.0}});
  const auto ks = run_ks(model, obs);
  CHECK(ks.diagnostics.zero_gain_jumps == 1);
  // a+ convention: the point mass on state 0 is untouched.
  const Eigen::Index last = ks.filter.rows() - 1;
  CHECK(ks.filter.probs(last, 0) == 1.0);
}

TEST_CASE("jump sizes outside the admissible set are rejected by the runners") {
  const auto model = desk_a();
  ObservationPath obs = make_obs({0.0, 0.5, 1.0}, {0.0, 2.0, 2.0}, {{1, 0.5, 2.0}});
  CHECK_THROWS_AS(run_zakai(model, obs), std::invalid_argument);
  CHECK_THROWS_AS(run_ks(model, obs), std::invalid_argument);

  // A jump claimed at the initial grid point is malformed data.
  ObservationPath at_origin = make_obs({0.0, 0.5, 1.0}, {1.0, 1.0, 1.0}, {{0, 0.0, 1.0}});
  CHECK_THROWS_AS(run_zakai(model, at_origin), std::invalid_argument);

  // Interior jumps invalidate a between-jump segment.
  ObservationPath mid = make_obs({0.0, 0.5, 1.0}, {0.0, 1.0, 1.0}, {{1, 0.5, 1.0}});
  mid.wtilde = Eigen::VectorXd::Zero(2);
  UnnormalizedFilterState state{Eigen::Vector2d(0.5, 0.5), 0.0, 0.0};
  CHECK_THROWS_AS(zakai_between_jumps(model, state, mid, 0, 2), std::invalid_argument);
}

TEST_CASE("both jump-update routes coincide in exact arithmetic") {
  // Desk model A tables: no common jumps, observed intensities (1, 3).
  {
    FractionVector stay(2), total(2), v(2);
    stay << Fraction(1), Fraction(3);
    total = stay;
    FractionMatrix common = FractionMatrix::Constant(2, 2, Fraction(0));
    v << Fraction(1, 2), Fraction(1, 2);

    const FractionVector unnorm = observed_jump_update<Fraction>(stay, common, v);
    CHECK(unnorm[0] == Fraction(1, 2));
    CHECK(unnorm[1] == Fraction(3, 2));
    const Fraction mass = unnorm[0] + unnorm[1];
    const FractionVector zakai_pi = unnorm / mass;

    const FractionVector ks_pi = ks_jump_update<Fraction>(common, total, v);
    CHECK(zakai_pi[0] == ks_pi[0]);
    CHECK(zakai_pi[1] == ks_pi[1]);
    CHECK(ks_pi[0] == Fraction(1, 4));
    CHECK(ks_pi[1] == Fraction(3, 4));
  }
  // Desk model B tables: pure common jumps with unit rates.
  {
    FractionVector stay(2), total(2), v(2);
    stay << Fraction(0), Fraction(0);
    total << Fraction(1), Fraction(1);
    FractionMatrix common(2, 2);
    common << Fraction(0), Fraction(1), Fraction(1), Fraction(0);
    v << Fraction(3, 10), Fraction(7, 10);

    const FractionVector unnorm = observed_jump_update<Fraction>(stay, common, v);
    const Fraction mass = unnorm[0] + unnorm[1];
    CHECK(mass == Fraction(1));
    const FractionVector ks_pi = ks_jump_update<Fraction>(common, total, v);
    CHECK(unnorm[0] / mass == ks_pi[0]);
    CHECK(unnorm[1] / mass == ks_pi[1]);
    CHECK(ks_pi[0] == Fraction(7, 10));
    CHECK(ks_pi[1] == Fraction(3, 10));
  }
  // a+ convention in exact arithmetic: zero intensity leaves pi alone.
  {
    FractionVector total(2), v(2);
    total << Fraction(0), Fraction(0);
    FractionMatrix common = FractionMatrix::Constant(2, 2, Fraction(0));
    v << Fraction(2, 5), Fraction(3, 5);
    const FractionVector ks_pi = ks_jump_update<Fraction>(common, total, v);
    CHECK(ks_pi[0] == v[0]);
    CHECK(ks_pi[1] == v[1]);
  }
}
