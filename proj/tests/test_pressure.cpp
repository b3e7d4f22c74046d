#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "lydim/errors.hpp"
#include "lydim/pressure.hpp"

using namespace lydim;
using doctest::Approx;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

double circle_gap(double a, double b) {
  const double d = std::abs(a - b);
  return std::min(d, 1.0 - d);
}

// Greedy (n, eps)-separated subset of a uniform grid under the doubling map.
std::size_t brute_force_doubling(int n, double eps, int grid) {
  std::vector<std::vector<double>> kept;
  for (int i = 0; i < grid; ++i) {
    std::vector<double> orb(n);
    double x = static_cast<double>(i) / grid;
    for (int k = 0; k < n; ++k) {
      orb[k] = x;
      x = std::fmod(2.0 * x, 1.0);
    }
    bool ok = true;
    for (const auto& other : kept) {
      double d = 0.0;
      for (int k = 0; k < n; ++k) d = std::max(d, circle_gap(orb[k], other[k]));
      if (!(d > eps)) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(orb);
  }
  return kept.size();
}

void check_separated_and_maximal(const ModelSystem& sys, const SeparatedSet& s) {
  std::vector<std::vector<Point>> orbits;
  for (const auto& w : s.words) orbits.push_back(coded_orbit(sys, w, s.n));
  for (std::size_t i = 0; i < orbits.size(); ++i)
    for (std::size_t j = i + 1; j < orbits.size(); ++j) {
      double d = 0.0;
      for (int k = 0; k < s.n; ++k) d = std::max(d, distance(sys, orbits[i][k], orbits[j][k]));
      CHECK(d > s.epsilon);
    }
  // Every candidate anchor lies within eps of a chosen point.
  for_each_word(sys.coding(), s.candidate_depth, [&](const Word& w) {
    const auto orb = coded_orbit(sys, w, s.n);
    bool covered = false;
    for (const auto& o : orbits) {
      double d = 0.0;
      for (int k = 0; k < s.n; ++k) d = std::max(d, distance(sys, orb[k], o[k]));
      if (!(d > s.epsilon)) {
        covered = true;
        break;
      }
    }
    CHECK(covered);
  });
}

}  // namespace

TEST_CASE("separated set on the doubling map") {
  const auto dbl = ModelSystem::expanding_circle(2, 0.0);
  const int depth = auto_candidate_depth(dbl, 3, 0.1);
  const auto s = separated_set(dbl, 3, 0.1, depth);
  CHECK(s.points.size() >= 8);
  CHECK(s.points.size() <= 80);
  const auto brute = brute_force_doubling(3, 0.1, 10000);
  CHECK(static_cast<double>(s.points.size()) <= 2.0 * brute);
  CHECK(static_cast<double>(brute) <= 2.0 * s.points.size());
  check_separated_and_maximal(dbl, s);
}

TEST_CASE("separated sets are separated and maximal over candidates") {
  using V = Eigen::Vector2d;
  const std::vector<ModelSystem> systems = {
      ModelSystem::cantor_repeller({{0.0, 3.0}, {2.0 / 3.0, 3.0}}),
      ModelSystem::expanding_circle(3, 0.1),
      ModelSystem::diagonal_torus(2, 3),
      ModelSystem::planar_repeller({{V(0, 0), V(3, 4)}, {V(2.0 / 3.0, 0.75), V(3, 4)}}),
  };
  for (const auto& sys : systems) {
    CAPTURE(sys.describe());
    for (int n : {1, 3}) {
      const auto s = separated_set(sys, n, 0.2, auto_candidate_depth(sys, n, 0.2));
      CHECK(s.points.size() == s.words.size());
      CHECK(!s.points.empty());
      check_separated_and_maximal(sys, s);
    }
  }
}

TEST_CASE("separated set edge cases") {
  const auto cantor = ModelSystem::cantor_repeller({{0.0, 3.0}, {2.0 / 3.0, 3.0}});
  CHECK(separated_set(cantor, 1, 1.0, auto_candidate_depth(cantor, 1, 1.0)).points.size() == 1);
  CHECK(separated_set(cantor, 2, 5.0, 4).points.size() == 1);
  CHECK_THROWS_AS(separated_set(cantor, 4, 0.1, 2), PrecisionError);
  CHECK_THROWS_AS(separated_set(cantor, 4, 0.001, 5), PrecisionError);
  CHECK_THROWS_AS(separated_set(cantor, 1, 0.0, 5), ArgumentError);
  CHECK_THROWS_AS(separated_set(cantor, 0, 0.1, 5), ArgumentError);
}

TEST_CASE("separated sets do not depend on thread count") {
  const auto circ = ModelSystem::expanding_circle(3, 0.1);
  const std::vector<double> eps = {0.1, 0.05};
  const Potential pot = SingularValuedPotential{0.5};
  const auto a = pressure_estimate(circ, pot, eps, 2, 5, 1);
  const auto b = pressure_estimate(circ, pot, eps, 2, 5, 4);
  CHECK(a.value == b.value);
  CHECK(a.diagnostics.log_partition == b.diagnostics.log_partition);
}

TEST_CASE("pressure estimate examples") {
  const std::vector<double> eps = {0.1, 0.05};
  const auto dbl = ModelSystem::expanding_circle(2, 0.0);
  const auto e = pressure_estimate(dbl, SingularValuedPotential{0.0}, eps, 4, 8);
  CHECK(std::abs(e.value - std::log(2.0)) <= 0.02);
  CHECK(e.method == PressureMethod::separated_set);
  CHECK(e.diagnostics.log_partition.size() == 2);
  CHECK(e.diagnostics.log_partition[0].size() == 5);

  const auto cantor = ModelSystem::cantor_repeller({{0.0, 3.0}, {2.0 / 3.0, 3.0}});
  const double t = std::log(2.0) / std::log(3.0);
  const auto c = pressure_estimate(cantor, LocallyConstantPotential{vec({-t * std::log(3.0), -t * std::log(3.0)})}, eps, 4, 8);
  CHECK(std::abs(c.value) <= 0.02);

  const auto torus = ModelSystem::diagonal_torus(2, 3);
  const std::vector<double> teps = {0.2, 0.1};
  const auto tr = pressure_estimate(torus, SingularValuedPotential{1.0}, teps, 1, 4);
  CHECK(std::abs(tr.value - std::log(3.0)) <= 0.05);
}

TEST_CASE("zero potential reproduces the entropy of the coding") {
  using V = Eigen::Vector2d;
  const std::vector<double> eps = {0.1, 0.05};
  const std::vector<ModelSystem> systems = {
      ModelSystem::cantor_repeller({{0.0, 3.0}, {2.0 / 3.0, 3.0}}),
      ModelSystem::cantor_repeller({{0.0, 2.0}, {0.75, 4.0}}),
      ModelSystem::expanding_circle(3, 0.1),
      ModelSystem::planar_repeller({{V(0, 0), V(3, 4)}, {V(2.0 / 3.0, 0.75), V(3, 4)}}),
  };
  for (const auto& sys : systems) {
    CAPTURE(sys.describe());
    const auto e = pressure_estimate(sys, SingularValuedPotential{0.0}, eps, 4, 8);
    const double h = sft_pressure(sys.coding(), std::vector<double>(sys.alphabet_size(), 0.0)).value;
    CHECK(std::abs(e.value - h) <= 0.02);
  }
}

TEST_CASE("separated-set pressure agrees with the SFT oracle for locally constant potentials") {
  using V = Eigen::Vector2d;
  const std::vector<double> eps = {0.1, 0.05};
  const std::vector<ModelSystem> systems = {
      ModelSystem::cantor_repeller({{0.0, 3.0}, {2.0 / 3.0, 3.0}}),
      ModelSystem::cantor_repeller({{0.0, 2.0}, {0.75, 4.0}}),
      ModelSystem::planar_repeller({{V(0, 0), V(3, 4)}, {V(2.0 / 3.0, 0.75), V(3, 4)}}),
  };
  for (const auto& sys : systems) {
    for (double frac : {0.3, 0.63, 1.0}) {
      const double t = frac * sys.dim();
      CAPTURE(sys.describe());
      CAPTURE(t);
      const Eigen::VectorXd w = locally_constant_weights(sys, t);
      const double exact = sft_pressure(sys.coding(), std::vector<double>(w.data(), w.data() + w.size())).value;
      const auto est = pressure_estimate(sys, SingularValuedPotential{t}, eps, 4, 8);
      CHECK(std::abs(est.value - exact) <= 0.05);
    }
  }
}

TEST_CASE("pressure estimate argument errors") {
  const auto dbl = ModelSystem::expanding_circle(2, 0.0);
  const std::vector<double> up = {0.05, 0.1};
  const std::vector<double> neg = {0.1, -0.05};
  const std::vector<double> ok = {0.1};
  const std::vector<double> none;
  CHECK_THROWS_AS(pressure_estimate(dbl, SingularValuedPotential{0.0}, up, 4, 8), ArgumentError);
  CHECK_THROWS_AS(pressure_estimate(dbl, SingularValuedPotential{0.0}, neg, 4, 8), ArgumentError);
  CHECK_THROWS_AS(pressure_estimate(dbl, SingularValuedPotential{0.0}, none, 4, 8), ArgumentError);
  CHECK_THROWS_AS(pressure_estimate(dbl, SingularValuedPotential{0.0}, ok, 4, 6), ArgumentError);
  CHECK_THROWS_AS(pressure_estimate(dbl, LocallyConstantPotential{vec({0.0})}, ok, 4, 8), ArgumentError);
}

TEST_CASE("additive potentials evaluated along orbits") {
  const auto dbl = ModelSystem::expanding_circle(2, 0.0);
  const std::vector<double> eps = {0.1, 0.05};
  // S_n(log|f'|) - n log 2 = 0, so pressure of -log|f'| is 0.
  const auto e = pressure_estimate(dbl, AdditivePotential{[](const Point&) { return -std::log(2.0); }}, eps, 4, 8);
  CHECK(std::abs(e.value) <= 0.02);
  const Word w = {0, 1, 1, 0, 1};
  const auto pts = coded_orbit(dbl, w, 4);
  const double s = potential_sum(dbl, AdditivePotential{[](const Point& x) { return x(0); }}, w, pts, 4);
  double direct = 0.0;
  for (int k = 0; k < 4; ++k) direct += pts[k](0);
  CHECK(s == Approx(direct).epsilon(1e-15));
}

TEST_CASE("SFT pressure examples") {
  const auto full2 = SymbolicCoding::full(2);
  const std::vector<double> zero = {0.0, 0.0};
  const auto a = sft_pressure(full2, zero);
  CHECK(a.value == Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(a.method == PressureMethod::sft_exact);
  CHECK(a.diagnostics.epsilons.empty());
  CHECK(a.residual() == 0.0);

  const std::vector<double> third = {std::log(1.0 / 3.0), std::log(1.0 / 3.0)};
  CHECK(sft_pressure(full2, third).value == Approx(std::log(2.0 / 3.0)).epsilon(1e-12));
  CHECK(sft_pressure(full2, third).value == Approx(-0.405465).epsilon(1e-6));

  SymbolicCoding golden{(Eigen::MatrixXi(2, 2) << 1, 1, 1, 0).finished()};
  CHECK(sft_pressure(golden, zero).value == Approx(std::log((1 + std::sqrt(5.0)) / 2)).epsilon(1e-12));
  CHECK(sft_pressure(golden, zero).value == Approx(0.481212).epsilon(1e-6));

  // Nonuniform weights: characteristic polynomial of [[e^a, e^b], [e^a, 0]].
  const std::vector<double> w = {0.3, -0.7};
  const double ea = std::exp(0.3), eb = std::exp(-0.7);
  const double root = (ea + std::sqrt(ea * ea + 4 * ea * eb)) / 2;
  CHECK(sft_pressure(golden, w).value == Approx(std::log(root)).epsilon(1e-12));
}

TEST_CASE("SFT pressure errors") {
  SymbolicCoding reducible{(Eigen::MatrixXi(2, 2) << 1, 1, 0, 1).finished()};
  SymbolicCoding periodic{(Eigen::MatrixXi(2, 2) << 0, 1, 1, 0).finished()};
  const std::vector<double> zero = {0.0, 0.0};
  CHECK_THROWS_AS(sft_pressure(reducible, zero), StructureError);
  CHECK_THROWS_AS(sft_pressure(periodic, zero), StructureError);
  const std::vector<double> bad = {0.0, std::nan("")};
  CHECK_THROWS_AS(sft_pressure(SymbolicCoding::full(2), bad), ArgumentError);
  const std::vector<double> short_w = {0.0};
  CHECK_THROWS_AS(sft_pressure(SymbolicCoding::full(2), short_w), ArgumentError);
}

TEST_CASE("potential average examples") {
  const auto torus = ModelSystem::diagonal_torus(2, 3);
  Eigen::VectorXd p(6);
  p << 0.3, 0.1, 0.1, 0.2, 0.2, 0.1;
  const auto a = potential_average(torus, ErgodicMeasureSpec::bernoulli(p), SingularValuedPotential{1.0});
  CHECK(a.exact);
  CHECK(a.value == Approx(-std::log(2.0)).epsilon(1e-14));

  const auto dbl = ModelSystem::expanding_circle(2, 0.0);
  const auto lebesgue = ErgodicMeasureSpec::bernoulli(vec({0.5, 0.5}));
  const auto b = potential_average(dbl, lebesgue, AdditivePotential{[](const Point&) { return std::log(2.0); }}, 50, 20, 3);
  CHECK(b.value == Approx(std::log(2.0)).epsilon(1e-12));

  const auto markov = ErgodicMeasureSpec::markov((Eigen::MatrixXd(2, 2) << 0.9, 0.1, 0.5, 0.5).finished());
  const auto c = potential_average(dbl, markov, LocallyConstantPotential{vec({1.0, 0.0})});
  CHECK(c.exact);
  CHECK(c.value == Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("Monte-Carlo potential average on the perturbed circle") {
  const auto circ = ModelSystem::expanding_circle(2, 0.1);
  const auto mu = ErgodicMeasureSpec::bernoulli(vec({0.5, 0.5}));
  const auto a = potential_average(circ, mu, SingularValuedPotential{1.0}, 100, 200, 5);
  CHECK(!a.exact);
  CHECK(a.standard_error > 0.0);
  // -log|f'| averages between -log(2 + 0.2 pi) and -log(2 - 0.2 pi).
  CHECK(a.value < -std::log(2.0 - 0.2 * M_PI));
  CHECK(a.value > -std::log(2.0 + 0.2 * M_PI));
  CHECK_THROWS_AS(potential_average(circ, mu, SingularValuedPotential{1.0}, 0, 10, 5), ArgumentError);
}

TEST_CASE("measure pressure examples") {
  const auto cantor = ModelSystem::cantor_repeller({{0.0, 3.0}, {2.0 / 3.0, 3.0}});
  const auto half = ErgodicMeasureSpec::bernoulli(vec({0.5, 0.5}));
  const double s = std::log(2.0) / std::log(3.0);
  CHECK(std::abs(measure_pressure(cantor, half, SingularValuedPotential{s})) < 1e-12);
  CHECK(measure_pressure(cantor, half, SingularValuedPotential{0.0}) == Approx(std::log(2.0)).epsilon(1e-14));

  const auto p7 = ErgodicMeasureSpec::bernoulli(vec({0.7, 0.3}));
  const auto f = measure_pressure_function(cantor, p7);
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? lo : hi) = mid;
  }
  const double h7 = -(0.7 * std::log(0.7) + 0.3 * std::log(0.3));
  CHECK(lo == Approx(h7 / std::log(3.0)).epsilon(1e-12));
  CHECK(lo == Approx(0.556034).epsilon(1e-6));
}

TEST_CASE("t -> P_mu(Phi(t)) decreases with slope at most -log kappa") {
  using V = Eigen::Vector2d;
  struct Case {
    ModelSystem sys;
    ErgodicMeasureSpec mu;
  };
  Eigen::VectorXd p6(6);
  p6 << 0.3, 0.1, 0.1, 0.2, 0.2, 0.1;
  std::vector<Case> cases = {
      {ModelSystem::cantor_repeller({{0.0, 2.0}, {0.75, 4.0}}), ErgodicMeasureSpec::bernoulli(vec({0.3, 0.7}))},
      {ModelSystem::diagonal_torus(2, 3), ErgodicMeasureSpec::bernoulli(p6)},
      {ModelSystem::planar_repeller({{V(0, 0), V(3, 5)}, {V(0.75, 0.6), V(4, 2.5)}}),
       ErgodicMeasureSpec::bernoulli(vec({0.4, 0.6}))},
      {ModelSystem::expanding_circle(3, 0.1), ErgodicMeasureSpec::bernoulli(vec({0.2, 0.5, 0.3}))},
  };
  for (const auto& c : cases) {
    CAPTURE(c.sys.describe());
    const auto f = measure_pressure_function(c.sys, c.mu, 100, 200, 3);
    const double log_kappa = std::log(c.sys.min_expansion());
    const int steps = 20 * c.sys.dim();
    for (int i = 0; i < steps; ++i) {
      const double t0 = c.sys.dim() * static_cast<double>(i) / steps;
      const double t1 = c.sys.dim() * static_cast<double>(i + 1) / steps;
      CHECK((f(t1) - f(t0)) / (t1 - t0) <= -log_kappa + 1e-9);
    }
  }
}

TEST_CASE("variational inequality against the SFT oracle") {
  using V = Eigen::Vector2d;
  const std::vector<ModelSystem> systems = {
      ModelSystem::cantor_repeller({{0.0, 2.0}, {0.75, 4.0}}),
      ModelSystem::diagonal_torus(2, 3),
      ModelSystem::planar_repeller({{V(0, 0), V(3, 4)}, {V(2.0 / 3.0, 0.75), V(3, 4)}}),
  };
  std::mt19937_64 rng(8);
  for (const auto& sys : systems) {
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd p(sys.alphabet_size());
      for (auto& x : p) x = 0.05 + static_cast<double>(rng() % 1000) / 1000.0;
      p /= p.sum();
      const auto mu = ErgodicMeasureSpec::bernoulli(p);
      const double t = sys.dim() * static_cast<double>(rng() % 101) / 100.0;
      const Eigen::VectorXd w = locally_constant_weights(sys, t);
      const double top = sft_pressure(sys.coding(), std::vector<double>(w.data(), w.data() + w.size())).value;
      CHECK(measure_pressure(sys, mu, SingularValuedPotential{t}) <= top + 1e-9);
      CHECK(measure_pressure(sys, mu, LocallyConstantPotential{w}) <= top + 1e-9);
    }
  }
}

TEST_CASE("locally constant weights") {
  const auto torus = ModelSystem::diagonal_torus(2, 3);
  const auto w = locally_constant_weights(torus, 1.5);
  CHECK(w.size() == 6);
  for (auto x : w) CHECK(x == Approx(-(std::log(2.0) + 0.5 * std::log(3.0))));
  CHECK_THROWS_AS(locally_constant_weights(ModelSystem::expanding_circle(2, 0.1), 0.5), ArgumentError);
  CHECK_THROWS_AS(locally_constant_weights(torus, 2.5), ArgumentError);
  using V = Eigen::Vector2d;
  const auto mixed = ModelSystem::planar_repeller({{V(0, 0), V(3, 5)}, {V(0.75, 0.6), V(4, 2.5)}});
  CHECK_THROWS_AS(locally_constant_weights(mixed, 1.5), ArgumentError);
}
