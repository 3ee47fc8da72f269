#include "jdfilter/model.hpp"

#include "jdfilter/assumptions.hpp"
#include "support/desk_models.hpp"

#include <doctest.h>

#include <set>

using namespace jdfilter;
using testing::desk_a;
using testing::desk_b;

namespace {

std::set<std::string> names_of(const FiniteStateSignalModel& m,
                               const std::vector<std::size_t>& idx) {
  std::set<std::string> out;
  for (auto i : idx) out.insert(m.marks().marks()[i].name);
  return out;
}

JumpDiffusionSystem pure_diffusion() {
  return JumpDiffusionSystem(Affine{0, 0, 0}, Affine{1, 0, 0}, Affine{0, 0, 0}, Affine{1, 0, 0},
                             0.0, MarkSpace{}, 0.0, 0.0, 1.0);
}

const TestFunction kIdentity{[](double, double x) { return x; },
                             [](double, double) { return 0.0; },
                             [](double, double) { return 1.0; },
                             [](double, double) { return 0.0; }};

const TestFunction kConstant{[](double, double) { return 3.5; }};

const TestFunction kSquare{[](double, double x) { return x * x; },
                           [](double, double) { return 0.0; },
                           [](double, double x) { return 2.0 * x; },
                           [](double, double) { return 2.0; }};

}  // namespace

TEST_CASE("desk model A compiles to the documented mark space") {
  const auto a = desk_a();
  std::set<std::string> names;
  for (const auto& m : a.marks().marks()) names.insert(m.name);
  CHECK(names == std::set<std::string>{"s01", "s10", "o1", "o2"});
  CHECK(a.jump_sizes() == std::vector<double>{1.0});
  CHECK(a.eta_total_mass() == 1.0);
}

TEST_CASE("d_set picks the marks producing the requested sizes") {
  const auto a = desk_a();
  CHECK(names_of(a, d_set(a, 0.3, 0.0, 0.0, {1.0})) == std::set<std::string>{"o1"});
  CHECK(names_of(a, d_set(a, 0.3, 1.0, 0.0, {1.0})) == std::set<std::string>{"o1", "o2"});
  CHECK(d_set(a, 0.3, 0.0, 0.0, {2.0}).empty());
  CHECK(d_set(a, 0.3, 1.0, 0.0, {2.0}).empty());
  CHECK_THROWS(d_set(a, 0.3, 0.0, 0.0, {0.0}));

  // Companion sets: observed marks and signal marks.
  CHECK(names_of(a, observed_jump_marks(a, 0.0, 1.0, 0.0)) ==
        std::set<std::string>{"o1", "o2"});
  CHECK(names_of(a, signal_jump_marks(a, 0.0, 0.0)) == std::set<std::string>{"s01"});
}

TEST_CASE("local characteristics on desk model A") {
  const auto a = desk_a();
  const auto lc0 = local_characteristics(a, 0.0, 0.0, 0.0);
  CHECK(lc0.lambda == doctest::Approx(1.0).epsilon(1e-15));
  REQUIRE(lc0.phi.size() == 1);
  CHECK(lc0.phi[0].first == 1.0);
  CHECK(lc0.phi[0].second == doctest::Approx(1.0).epsilon(1e-15));

  const auto lc1 = local_characteristics(a, 0.0, 1.0, 0.0);
  CHECK(lc1.lambda == doctest::Approx(3.0).epsilon(1e-15));
  REQUIRE(lc1.phi.size() == 1);
  CHECK(lc1.phi[0].second == doctest::Approx(1.0).epsilon(1e-15));

  const auto lc_empty = local_characteristics(pure_diffusion(), 0.0, 0.0, 0.0);
  CHECK(lc_empty.lambda == 0.0);
  CHECK(lc_empty.phi.empty());
}

TEST_CASE("generator on the desk chain and on a pure diffusion") {
  const auto a = desk_a();
  CHECK(generator_apply(a, kIdentity, 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(generator_apply(a, kIdentity, 0.0, 1.0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(generator_apply(a, kConstant, 0.0, 0.0) == 0.0);
  CHECK(generator_apply(pure_diffusion(), kSquare, 0.0, 0.7) ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("common jump operator") {
  const auto a = desk_a();
  const auto b = desk_b();
  const TestFunction indicator1{[](double, double x) { return x == 1.0 ? 1.0 : 0.0; }};

  // A has no common jumps: the operator vanishes identically.
  for (double x : {0.0, 1.0}) {
    CHECK(common_jump_operator(a, kIdentity, 0.0, x, 0.0, 1.0) == 0.0);
    CHECK(common_jump_operator(a, kSquare, 0.0, x, 0.0, 1.0) == 0.0);
  }
  CHECK(common_jump_operator(b, indicator1, 0.0, 0.0, 0.0, 1.0) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(common_jump_operator(b, kConstant, 0.0, 0.0, 0.0, 1.0) == 0.0);
}

TEST_CASE("restricted generator drops observed transitions") {
  const auto a = desk_a();
  const auto b = desk_b();
  CHECK(restricted_generator_apply(a, kIdentity, 0.0, 0.0, 0.0) ==
        doctest::Approx(1.0).epsilon(1e-15));
  // In B every signal transition is observed, so the restricted jump sum is
  // empty for any time-independent f.
  CHECK(restricted_generator_apply(b, kIdentity, 0.0, 0.0, 0.0) == 0.0);
  CHECK(restricted_generator_apply(b, kSquare, 0.0, 1.0, 0.0) == 0.0);
  // Without jumps the restricted generator is the full generator.
  CHECK(restricted_generator_apply(pure_diffusion(), kSquare, 0.0, 0.7, 0.0) ==
        generator_apply(pure_diffusion(), kSquare, 0.0, 0.7));
}

TEST_CASE("unit-atom reference measure over the admissible sizes") {
  const auto a = desk_a();
  auto atoms = eta_measure(a);
  REQUIRE(atoms.size() == 1);
  CHECK(atoms[0] == std::pair<double, double>{1.0, 1.0});

  const auto b = desk_b();
  CHECK(eta_measure(b) == std::vector<std::pair<double, double>>{{1.0, 1.0}});

  // Two observed sizes -> two unit atoms, total mass 2.
  MarkSpace two({Mark{"up", 0.5, 0.0, 1.0}, Mark{"down", 2.0, 0.0, -1.0}});
  JumpDiffusionSystem m(Affine{}, Affine{1, 0, 0}, Affine{}, Affine{1, 0, 0}, 0.0, two, 0.0, 0.0,
                        1.0);
  auto atoms2 = eta_measure(m);
  REQUIRE(atoms2.size() == 2);
  CHECK(atoms2[0] == std::pair<double, double>{-1.0, 1.0});
  CHECK(atoms2[1] == std::pair<double, double>{1.0, 1.0});
}

TEST_CASE("size partition and operator decomposition hold pointwise") {
  // Gated marks make the d-sets state dependent; check the identities on a
  // grid of evaluation points.
  MarkSpace marks({Mark{"a", 0.7, 0.5, 1.0, true, -1.0, 0.5},
                   Mark{"b", 1.3, -0.25, -2.0},
                   Mark{"c", 0.4, 1.0, 0.0},
                   Mark{"d", 0.9, 0.0, 1.0, true, 0.0, 2.0}});
  JumpDiffusionSystem m(Affine{0.1, 0.2, 0}, Affine{1, 0, 0}, Affine{0, 0, 0.1}, Affine{1, 0, 0},
                        0.3, marks, 0.0, 0.0, 1.0);

  for (double x : {-2.0, -0.5, 0.0, 0.3, 1.0, 3.0}) {
    const auto lc = local_characteristics(m, 0.2, x, 0.4);
    double partition_mass = 0.0;
    double phi_total = 0.0;
    for (const auto& [h, p] : lc.phi) {
      for (auto i : d_set(m, 0.2, x, 0.4, {h})) partition_mass += m.marks().marks()[i].weight;
      phi_total += p;
    }
    double observed_mass = 0.0;
    for (auto i : observed_jump_marks(m, 0.2, x, 0.4))
      observed_mass += m.marks().marks()[i].weight;
    CHECK(partition_mass == doctest::Approx(observed_mass).epsilon(1e-12));
    if (lc.lambda > 0.0) CHECK(phi_total == doctest::Approx(1.0).epsilon(1e-12));

    // L = L_restricted + sum over sizes of the common-jump part.
    double decomposition = restricted_generator_apply(m, kSquare, 0.2, x, 0.4);
    for (const auto& [h, p] : lc.phi)
      decomposition += common_jump_operator(m, kSquare, 0.2, x, 0.4, h);
    CHECK(generator_apply(m, kSquare, 0.2, x) == doctest::Approx(decomposition).epsilon(1e-12));

    // Constants are annihilated by all three operators.
    CHECK(generator_apply(m, kConstant, 0.2, x) == 0.0);
    CHECK(restricted_generator_apply(m, kConstant, 0.2, x, 0.4) == 0.0);
  }
}

TEST_CASE("finite-state generator matrix is conservative") {
  for (const auto& model : {desk_a(), desk_b()}) {
    const Eigen::VectorXd row_sums = model.generator_matrix().rowwise().sum();
    CHECK(row_sums.cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("model validation rejects malformed inputs") {
  const auto a = desk_a();
  // mu0 row not stochastic
  Eigen::MatrixXd bad_mu(2, 2);
  bad_mu << 0, 0.5, 1, 0;
  CHECK_THROWS_AS(FiniteStateSignalModel(a.states(), a.labels(), a.lambda0(), bad_mu,
                                         Eigen::MatrixXd::Zero(2, 2), {}, a.b1_states(),
                                         a.sigma1(), 0.0, 0, Eigen::VectorXd(), 0.0, 1.0),
                  std::invalid_argument);
  // extra mark with zero size
  ObservationOnlyMark zero_size{"bad", Eigen::VectorXd::Ones(2), 0.0};
  CHECK_THROWS_AS(FiniteStateSignalModel(a.states(), a.labels(), a.lambda0(), a.mu0(),
                                         Eigen::MatrixXd::Zero(2, 2), {zero_size}, a.b1_states(),
                                         a.sigma1(), 0.0, 0, Eigen::VectorXd(), 0.0, 1.0),
                  std::invalid_argument);
  // rho out of range
  CHECK_THROWS_AS(JumpDiffusionSystem(Affine{}, Affine{1, 0, 0}, Affine{}, Affine{1, 0, 0}, 1.5,
                                      MarkSpace{}, 0.0, 0.0, 1.0),
                  std::invalid_argument);
  // duplicate mark names
  CHECK_THROWS_AS(MarkSpace({Mark{"m", 1.0, 0, 1}, Mark{"m", 1.0, 0, 1}}), std::invalid_argument);
}
