#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lydim/errors.hpp"
#include "lydim/systems.hpp"

using namespace lydim;
using doctest::Approx;

namespace {

Point p1(double x) { return Point::Constant(1, x); }
Point p2(double x, double y) { return (Point(2) << x, y).finished(); }

ModelSystem cantor33() { return ModelSystem::cantor_repeller({{0.0, 3.0}, {2.0 / 3.0, 3.0}}); }
ModelSystem planar34() {
  return ModelSystem::planar_repeller({{Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 4)}, {Eigen::Vector2d(2.0 / 3.0, 0.75), Eigen::Vector2d(3, 4)}});
}

std::vector<std::pair<std::string, ModelSystem>> all_systems() {
  return {{"doubling", ModelSystem::expanding_circle(2, 0.0)},
          {"perturbed", ModelSystem::expanding_circle(2, 0.1)},
          {"cantor", cantor33()},
          {"cantor-2-4", ModelSystem::cantor_repeller({{0.0, 2.0}, {0.75, 4.0}})},
          {"torus", ModelSystem::diagonal_torus(2, 3)},
          {"planar", planar34()},
          {"horseshoe", ModelSystem::linear_horseshoe(3.0, 0.25)}};
}

Word random_word(std::mt19937_64& rng, int k, int n) {
  Word w(n);
  for (auto& s : w) s = static_cast<int>(rng() % k);
  return w;
}

}  // namespace

TEST_CASE("eval examples") {
  CHECK(eval(ModelSystem::expanding_circle(2, 0.0), p1(0.3))(0) == Approx(0.6).epsilon(1e-15));
  CHECK(eval(cantor33(), p1(0.7))(0) == Approx(0.1).epsilon(1e-12));
  const Point t = eval(ModelSystem::diagonal_torus(2, 3), p2(0.5, 0.5));
  CHECK(t(0) == Approx(0.0).epsilon(1e-15));
  CHECK(t(1) == Approx(0.5).epsilon(1e-15));
}

TEST_CASE("eval outside every branch is a domain error") {
  CHECK_THROWS_AS(eval(cantor33(), p1(0.5)), DomainError);
  CHECK_THROWS_AS(eval(planar34(), p2(0.5, 0.5)), DomainError);
}

TEST_CASE("jacobian examples") {
  CHECK(jacobian(ModelSystem::expanding_circle(2, 0.0), p1(0.37))(0, 0) == 2.0);
  // f(x) = 2x + 0.1 sin(2 pi x): a = 0.1.
  const auto circ = ModelSystem::expanding_circle(2, 0.1);
  const double fd = (eval(circ, p1(1e-5))(0) - (eval(circ, p1(1.0 - 1e-5))(0) - 1.0)) / 2e-5;
  CHECK(jacobian(circ, p1(0.0))(0, 0) == Approx(2.0 + 0.2 * std::numbers::pi).epsilon(1e-12));
  CHECK(jacobian(circ, p1(0.0))(0, 0) == Approx(fd).epsilon(1e-8));
  CHECK(jacobian(circ, p1(0.0))(0, 0) == Approx(2.628319).epsilon(1e-6));
  const auto hs = ModelSystem::linear_horseshoe(3.0, 0.25);
  const Eigen::MatrixXd j = jacobian(hs, p2(0.1, 0.5));
  CHECK(j(0, 0) == 3.0);
  CHECK(j(1, 1) == 0.25);
  CHECK(j(0, 1) == 0.0);
  CHECK(j(1, 0) == 0.0);
}

TEST_CASE("jacobian matches central differences at random points") {
  std::mt19937_64 rng(3);
  for (const auto& [name, sys] : all_systems()) {
    CAPTURE(name);
    for (int i = 0; i < 100; ++i) {
      const Point x = anchor(sys, random_word(rng, sys.alphabet_size(), 6));
      const Eigen::MatrixXd j = jacobian(sys, x);
      const double h = 1e-7;
      for (int c = 0; c < sys.dim(); ++c) {
        Point a = x, b = x;
        a(c) -= h;
        b(c) += h;
        Point diff = eval(sys, b) - eval(sys, a);
        if (sys.periodic()) diff = diff.unaryExpr([](double v) { return v - std::round(v); });
        for (int r = 0; r < sys.dim(); ++r) CHECK(diff(r) / (2 * h) == Approx(j(r, c)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("orbit examples") {
  const auto o = orbit(ModelSystem::expanding_circle(2, 0.0), p1(0.1), 3);
  REQUIRE(o.size() == 4);
  const double want[] = {0.1, 0.2, 0.4, 0.8};
  for (int i = 0; i < 4; ++i) CHECK(o[i](0) == Approx(want[i]).epsilon(1e-14));
  // 1/4 = 0.0202..._3 lies in the middle-thirds set and has period 2.
  const auto c = orbit(cantor33(), p1(0.25), 2);
  CHECK(c[1](0) == Approx(0.75).epsilon(1e-14));
  CHECK(c[2](0) == Approx(0.25).epsilon(1e-14));
  // Fixed point of the doubling map.
  for (const auto& q : orbit(ModelSystem::expanding_circle(2, 0.0), p1(0.0), 5)) CHECK(q(0) == 0.0);
  // Fixed point 0 of the left Cantor branch.
  for (const auto& q : orbit(cantor33(), p1(0.0), 5)) CHECK(q(0) == 0.0);
}

TEST_CASE("orbit escape reports the step") {
  try {
    orbit(cantor33(), p1(0.2), 5);  // 0.2 -> 0.6 lies in the gap
    FAIL("expected EscapeError");
  } catch (const EscapeError& e) {
    CHECK(e.step == 1);
  }
}

TEST_CASE("encode and decode examples") {
  const auto dbl = ModelSystem::expanding_circle(2, 0.0);
  CHECK(encode(dbl, p1(0.3), 3) == Word{0, 1, 0});
  const Box b = decode(dbl, {0, 1});
  CHECK(b.lo(0) == Approx(0.25).epsilon(1e-15));
  CHECK(b.hi(0) == Approx(0.5).epsilon(1e-15));
  const Box c = decode(cantor33(), {1, 0});
  CHECK(c.lo(0) == Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(c.hi(0) == Approx(2.0 / 3.0 + 1.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("binary expansion oracle for encode") {
  const auto dbl = ModelSystem::expanding_circle(2, 0.0);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const double x = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    Word bits;
    double y = x;
    for (int k = 0; k < 30; ++k) {
      y *= 2;
      bits.push_back(y >= 1 ? 1 : 0);
      if (y >= 1) y -= 1;
    }
    CHECK(encode(dbl, p1(x), 30) == bits);
  }
}

TEST_CASE("encode rejects points off the invariant set") {
  CHECK_THROWS_AS(encode(cantor33(), p1(0.5), 3), CodingError);
  CHECK_THROWS_AS(encode(cantor33(), p1(0.2), 3), CodingError);  // 0.2 -> 0.6 is in the gap
}

TEST_CASE("decode contains x and encode inverts decode on anchors") {
  std::mt19937_64 rng(5);
  for (const auto& [name, sys] : all_systems()) {
    CAPTURE(name);
    for (int i = 0; i < 40; ++i) {
      const int n = 1 + static_cast<int>(rng() % 40);
      const Word w = random_word(rng, sys.alphabet_size(), n);
      const Point x = anchor(sys, w);
      CHECK(decode(sys, w).contains(x, kCodingTolerance));
      if (!sys.invertible()) CHECK(encode(sys, x, std::min(n, 20)) == Word(w.begin(), w.begin() + std::min(n, 20)));
      const Word shorter(w.begin(), w.end() - 1);
      CHECK(decode(sys, shorter).contains(decode(sys, w), kCodingTolerance));
    }
  }
}

TEST_CASE("coded orbit points are images under the map") {
  std::mt19937_64 rng(7);
  for (const auto& [name, sys] : all_systems()) {
    if (sys.invertible()) continue;
    CAPTURE(name);
    const Word w = random_word(rng, sys.alphabet_size(), 30);
    const auto pts = coded_orbit(sys, w, 6);
    for (int k = 0; k + 1 < 6; ++k) CHECK(distance(sys, eval(sys, pts[k]), pts[k + 1]) < 1e-10);
  }
}

TEST_CASE("circle and torus use the quotient metric") {
  const auto dbl = ModelSystem::expanding_circle(2, 0.0);
  CHECK(distance(dbl, p1(0.05), p1(0.95)) == Approx(0.1).epsilon(1e-12));
  CHECK(distance(ModelSystem::diagonal_torus(2, 3), p2(0.02, 0.5), p2(0.98, 0.3)) == Approx(0.2).epsilon(1e-12));
  CHECK(distance(cantor33(), p1(0.05), p1(0.95)) == Approx(0.9).epsilon(1e-12));
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(ModelSystem::expanding_circle(1, 0.0), ArgumentError);
  CHECK_THROWS_AS(ModelSystem::expanding_circle(2, 0.2), ArgumentError);  // |2 pi a| >= 1
  CHECK_THROWS_AS(ModelSystem::diagonal_torus(1, 3), ArgumentError);
  CHECK_THROWS_AS(ModelSystem::cantor_repeller({{0.0, 3.0}, {0.2, 3.0}}), ArgumentError);  // overlap
  CHECK_THROWS_AS(ModelSystem::cantor_repeller({{0.0, 0.5}}), ArgumentError);
  CHECK_THROWS_AS(ModelSystem::linear_horseshoe(1.5, 0.25), ArgumentError);
  CHECK_THROWS_AS(ModelSystem::linear_horseshoe(3.0, 0.6), ArgumentError);
  // Both diagonal orders are accepted.
  CHECK(ModelSystem::diagonal_torus(3, 2).alphabet_size() == 6);
}

TEST_CASE("coding is primitive and cylinders shrink geometrically") {
  for (const auto& [name, sys] : all_systems()) {
    CAPTURE(name);
    CHECK(sys.coding().full_shift());
    std::mt19937_64 rng(11);
    const Word w = random_word(rng, sys.alphabet_size(), 12);
    for (int n = 1; n < 12; ++n) {
      const Word a(w.begin(), w.begin() + n);
      const double rate = sys.invertible() ? 1.0 / sys.beta() : 1.0 / sys.min_expansion();
      const Box box = decode(sys, a);
      const double width = sys.invertible() ? box.width()(0) : box.diameter();
      CHECK(width <= std::pow(rate, n) + 1e-15);
    }
  }
}

TEST_CASE("stationary distribution examples") {
  const auto b = ErgodicMeasureSpec::bernoulli((Eigen::VectorXd(2) << 0.7, 0.3).finished());
  CHECK(stationary_distribution(b)(0) == Approx(0.7));
  CHECK(stationary_distribution(b)(1) == Approx(0.3));
  Eigen::MatrixXd q(2, 2);
  q << 0.9, 0.1, 0.5, 0.5;
  const auto m = ErgodicMeasureSpec::markov(q);
  // Oracle: pi_0 * 0.1 = pi_1 * 0.5 with pi_0 + pi_1 = 1.
  const double pi0 = 0.5 / (0.1 + 0.5);
  CHECK(stationary_distribution(m)(0) == Approx(pi0).epsilon(1e-12));
  CHECK(stationary_distribution(m)(1) == Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(stationary_distribution(ErgodicMeasureSpec::markov(Eigen::MatrixXd::Ones(1, 1)))(0) == 1.0);
}

TEST_CASE("measure validation") {
  CHECK_THROWS_AS(ErgodicMeasureSpec::bernoulli((Eigen::VectorXd(2) << 0.7, 0.4).finished()), ArgumentError);
  CHECK_THROWS_AS(ErgodicMeasureSpec::bernoulli((Eigen::VectorXd(2) << 1.2, -0.2).finished()), ArgumentError);
  Eigen::MatrixXd perm(2, 2);
  perm << 0, 1, 1, 0;
  CHECK_THROWS_AS(ErgodicMeasureSpec::markov(perm), StructureError);
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  CHECK_THROWS_AS(ErgodicMeasureSpec::markov(bad), ArgumentError);
}

TEST_CASE("measure entropy examples") {
  CHECK(measure_entropy(ErgodicMeasureSpec::bernoulli(Eigen::VectorXd::Constant(2, 0.5))) == Approx(std::log(2.0)));
  const double h7 = -(0.7 * std::log(0.7) + 0.3 * std::log(0.3));
  CHECK(measure_entropy(ErgodicMeasureSpec::bernoulli((Eigen::VectorXd(2) << 0.7, 0.3).finished())) == Approx(h7).epsilon(1e-14));
  CHECK(h7 == Approx(0.610864).epsilon(1e-6));
  Eigen::MatrixXd q(2, 2);
  q << 0.9, 0.1, 0.5, 0.5;
  const double hm = 5.0 / 6.0 * -(0.9 * std::log(0.9) + 0.1 * std::log(0.1)) + 1.0 / 6.0 * std::log(2.0);
  CHECK(measure_entropy(ErgodicMeasureSpec::markov(q)) == Approx(hm).epsilon(1e-12));
  CHECK(hm == Approx(0.386427).epsilon(1e-6));
  CHECK(measure_entropy(ErgodicMeasureSpec::bernoulli((Eigen::VectorXd(2) << 1.0, 0.0).finished())) == 0.0);
}

TEST_CASE("Bernoulli entropy is maximal at the uniform vector") {
  for (int k = 2; k <= 4; ++k) {
    const double top = measure_entropy(ErgodicMeasureSpec::bernoulli(Eigen::VectorXd::Constant(k, 1.0 / k)));
    CHECK(top == Approx(std::log(k)));
    for (int a = 1; a < 20; ++a) {
      Eigen::VectorXd p = Eigen::VectorXd::Constant(k, (1.0 - a / 20.0) / (k - 1));
      p(0) = a / 20.0;
      CHECK(measure_entropy(ErgodicMeasureSpec::bernoulli(p)) <= top + 1e-15);
    }
  }
}

TEST_CASE("substreams are deterministic and distinct") {
  auto a = substream(42, 7), b = substream(42, 7), c = substream(42, 8);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  const auto m = ErgodicMeasureSpec::bernoulli((Eigen::VectorXd(2) << 0.7, 0.3).finished());
  auto r1 = substream(1, 0), r2 = substream(1, 0);
  CHECK(m.sample(r1, 100) == m.sample(r2, 100));
}

TEST_CASE("measure must live on the system coding") {
  CHECK_THROWS_AS(check_compatible(ModelSystem::diagonal_torus(2, 3), ErgodicMeasureSpec::bernoulli(Eigen::VectorXd::Constant(2, 0.5))),
                  ArgumentError);
  CHECK_NOTHROW(check_compatible(cantor33(), ErgodicMeasureSpec::bernoulli(Eigen::VectorXd::Constant(2, 0.5))));
}
