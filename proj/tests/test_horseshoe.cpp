#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lydim/cocycle.hpp"
#include "lydim/dimension.hpp"
#include "lydim/errors.hpp"
#include "lydim/horseshoe.hpp"

using namespace lydim;
using doctest::Approx;

namespace {

const double kLog2 = std::log(2.0), kLog3 = std::log(3.0), kLog4 = std::log(4.0);

ErgodicMeasureSpec bern(double p) { return ErgodicMeasureSpec::bernoulli((Eigen::VectorXd(2) << p, 1 - p).finished()); }

double binom(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

double h2(double p) { return -(p * std::log(p) + (1 - p) * std::log(1 - p)); }

// Binary words of length n with |#0/n - p| <= eps, by brute force.
std::vector<Word> brute_blocks(int n, double p, double eps) {
  std::vector<Word> out;
  for (unsigned m = 0; m < (1u << n); ++m) {
    Word w(n);
    int zeros = 0;
    for (int i = 0; i < n; ++i) {
      w[i] = (m >> (n - 1 - i)) & 1u;
      zeros += w[i] == 0;
    }
    if (std::abs(static_cast<double>(zeros) / n - p) <= eps + 1e-12) out.push_back(w);
  }
  return out;
}

const ModelSystem& hs_geometry() {
  static const ModelSystem g = ModelSystem::linear_horseshoe(3.0, 0.25);
  return g;
}

}  // namespace

TEST_CASE("extraction examples") {
  const auto full = SymbolicCoding::full(2);
  const auto a = extract_horseshoe(full, bern(0.5), 4, 0.0);
  CHECK(a.blocks.size() == 6);
  CHECK(a.block_count == 6.0);
  for (const auto& b : a.blocks) CHECK(std::count(b.begin(), b.end(), 0) == 2);

  const auto b = extract_horseshoe(full, bern(0.7), 10, 0.05);
  CHECK(b.blocks.size() == 120);
  CHECK(b.classes.size() == 1);
  CHECK(b.classes[0].counts(0) == 7);

  for (int n : {1, 5, 12}) {
    const auto c = extract_horseshoe(full, bern(0.8), n, 1.0);
    CHECK(c.block_count == std::pow(2.0, n));
  }
}

TEST_CASE("extraction matches brute-force enumeration") {
  const auto full = SymbolicCoding::full(2);
  for (int n : {3, 8, 13}) {
    for (double p : {0.5, 0.6, 0.7}) {
      for (double eps : {0.0, 0.05, 0.15}) {
        const auto oracle = brute_blocks(n, p, eps);
        if (oracle.empty()) {
          CHECK_THROWS_AS(extract_horseshoe(full, bern(p), n, eps), InfeasibleError);
          continue;
        }
        const auto hs = extract_horseshoe(full, bern(p), n, eps);
        CAPTURE(n);
        CAPTURE(p);
        CAPTURE(eps);
        CHECK(hs.blocks == oracle);
        CHECK(hs.block_count == static_cast<double>(oracle.size()));
      }
    }
  }
}

TEST_CASE("class counting beyond the enumeration limit") {
  const auto hs = extract_horseshoe(SymbolicCoding::full(2), bern(0.7), 40, 0.05);
  CHECK(!hs.enumerated());
  double expect = 0.0;
  for (int k = 26; k <= 30; ++k) expect += binom(40, k);
  CHECK(hs.block_count == Approx(expect).epsilon(1e-12));
  CHECK(horseshoe_entropy(hs) == Approx(std::log(expect) / 40).epsilon(1e-12));
}

TEST_CASE("three-symbol Bernoulli extraction") {
  Eigen::VectorXd p(3);
  p << 0.5, 0.25, 0.25;
  const auto hs = extract_horseshoe(SymbolicCoding::full(3), ErgodicMeasureSpec::bernoulli(p), 4, 0.0);
  CHECK(hs.block_count == 12.0);  // 4! / (2! 1! 1!)
  CHECK(hs.blocks.size() == 12);
}

TEST_CASE("extraction errors") {
  const auto full = SymbolicCoding::full(2);
  CHECK_THROWS_AS(extract_horseshoe(full, bern(0.7), 3, 0.01), InfeasibleError);
  CHECK_THROWS_AS(extract_horseshoe(full, bern(0.7), 0, 0.1), ArgumentError);
  CHECK_THROWS_AS(extract_horseshoe(full, bern(0.7), 4, -0.1), ArgumentError);
  CHECK_THROWS_AS(extract_horseshoe(full, bern(0.7), 4, 1.5), ArgumentError);
  CHECK_THROWS_AS(extract_horseshoe(SymbolicCoding::full(3), bern(0.7), 4, 0.1), ArgumentError);
  SymbolicCoding golden{(Eigen::MatrixXi(2, 2) << 1, 1, 1, 0).finished()};
  CHECK_THROWS_AS(extract_horseshoe(golden, bern(0.7), 4, 0.1), ArgumentError);
}

TEST_CASE("horseshoe entropy examples") {
  const auto full = SymbolicCoding::full(2);
  CHECK(horseshoe_entropy(extract_horseshoe(full, bern(0.5), 4, 0.0)) == Approx(std::log(6.0) / 4).epsilon(1e-15));
  CHECK(horseshoe_entropy(extract_horseshoe(full, bern(0.5), 4, 0.0)) == Approx(0.447940).epsilon(1e-6));
  CHECK(horseshoe_entropy(extract_horseshoe(full, bern(0.3), 9, 1.0)) == Approx(kLog2).epsilon(1e-15));
  CHECK(horseshoe_entropy(extract_horseshoe(full, bern(0.7), 10, 0.05)) == Approx(0.478749).epsilon(1e-6));
}

TEST_CASE("horseshoe dimension examples") {
  const auto full = SymbolicCoding::full(2);
  const auto six = extract_horseshoe(full, bern(0.5), 4, 0.0);
  const double h = std::log(6.0) / 4;
  const auto d = horseshoe_dimension(six, hs_geometry());
  CHECK(d.value == Approx(h / kLog3 + h / kLog4).epsilon(1e-12));
  CHECK(std::abs(d.value - 0.730841) <= 1e-4);
  CHECK(d.diagnostics.at("unstable") == Approx(h / kLog3).epsilon(1e-12));
  CHECK(d.diagnostics.at("stable") == Approx(h / kLog4).epsilon(1e-12));

  const auto all = extract_horseshoe(full, bern(0.5), 6, 1.0);
  CHECK(horseshoe_dimension(all, hs_geometry()).value == Approx(kLog2 / kLog3 + 0.5).epsilon(1e-12));
  CHECK(horseshoe_dimension(all, hs_geometry()).value == Approx(1.130930).epsilon(1e-6));

  const auto one = extract_horseshoe(full, bern(0.5), 1, 0.5);
  CHECK(one.block_count == 2.0);
  const auto single = extract_horseshoe(full, bern(1.0 - 1e-9), 5, 0.01);
  CHECK(single.block_count == 1.0);
  CHECK(horseshoe_dimension(single, hs_geometry()).value == 0.0);

  const auto cantor = ModelSystem::cantor_repeller({{0.0, 3.0}, {2.0 / 3.0, 3.0}});
  CHECK(horseshoe_dimension(six, cantor).value == Approx(h / kLog3).epsilon(1e-12));
}

TEST_CASE("horseshoe dimension errors") {
  const auto six = extract_horseshoe(SymbolicCoding::full(2), bern(0.5), 4, 0.0);
  CHECK_THROWS_AS(horseshoe_dimension(six, ModelSystem::expanding_circle(2, 0.1)), ArgumentError);
  CHECK_THROWS_AS(horseshoe_dimension(six, ModelSystem::expanding_circle(3, 0.0)), ArgumentError);
}

TEST_CASE("convergence report examples") {
  const auto rep = convergence_report(SymbolicCoding::full(2), bern(0.7), hs_geometry(), {10, 20}, 0.05);
  REQUIRE(rep.rows.size() == 2);
  const double h = h2(0.7);
  CHECK(rep.target_entropy == Approx(h).epsilon(1e-14));
  CHECK(rep.target_dimension == Approx(h / kLog3 + h / kLog4).epsilon(1e-14));
  CHECK(rep.target_dimension == Approx(0.996680).epsilon(1e-6));

  const auto& r10 = rep.rows[0];
  CHECK(r10.blocks == 120.0);
  CHECK(r10.entropy == Approx(std::log(120.0) / 10).epsilon(1e-14));
  const double d10 = std::log(120.0) / 10 * (1 / kLog3 + 1 / kLog4);
  CHECK(r10.dimension == Approx(d10).epsilon(1e-14));
  CHECK(std::abs(r10.gap() - 0.215566) <= 1e-4);

  const auto& r20 = rep.rows[1];
  const double c20 = binom(20, 13) + binom(20, 14) + binom(20, 15);
  CHECK(c20 == 131784.0);
  CHECK(r20.blocks == c20);
  CHECK(r20.entropy == Approx(std::log(c20) / 20).epsilon(1e-14));
  CHECK(std::abs(r20.gap() - 0.034929) <= 1e-3);
  CHECK(r20.gap() < r10.gap());
  CHECK(r20.entropy_gap() < r10.entropy_gap());

  const auto full = convergence_report(SymbolicCoding::full(2), bern(0.5), hs_geometry(), {3, 7, 12}, 1.0);
  for (const auto& row : full.rows) CHECK(row.gap() == Approx(0.0).scale(1).epsilon(1e-12));
}

TEST_CASE("gap shrinks from n = 10 to n = 20") {
  for (double p : {0.6, 0.7, 0.8}) {
    CAPTURE(p);
    const auto rep = convergence_report(SymbolicCoding::full(2), bern(p), hs_geometry(), {10, 20}, 0.05);
    CHECK(rep.rows[1].gap() < rep.rows[0].gap());
    CHECK(rep.rows[1].entropy_gap() < rep.rows[0].entropy_gap());
  }
}

TEST_CASE("entropy is non-decreasing along doubling n") {
  for (double p : {0.6, 0.7, 0.8}) {
    const auto rep = convergence_report(SymbolicCoding::full(2), bern(p), hs_geometry(), {5, 10, 20, 40, 80}, 0.05);
    for (std::size_t i = 1; i < rep.rows.size(); ++i) CHECK(rep.rows[i].entropy >= rep.rows[i - 1].entropy - 1e-12);
    CHECK(std::abs(rep.rows.back().entropy - h2(p)) < 0.05);
  }
}

TEST_CASE("infeasible rows are marked and the run continues") {
  const auto rep = convergence_report(SymbolicCoding::full(2), bern(0.7), hs_geometry(), {3, 10}, 0.01);
  CHECK(!rep.rows[0].feasible);
  CHECK(!rep.rows[0].message.empty());
  CHECK(rep.rows[1].feasible);
  CHECK_THROWS_AS(convergence_report(SymbolicCoding::full(2), bern(0.7), hs_geometry(), {10, 10}, 0.05), ArgumentError);
  CHECK_THROWS_AS(convergence_report(SymbolicCoding::full(2), bern(0.7), hs_geometry(), {}, 0.05), ArgumentError);
}

TEST_CASE("entropy sandwich") {
  for (double p : {0.5, 0.6, 0.7, 0.8}) {
    for (int n : {4, 10, 20, 40}) {
      for (double eps : {0.05, 0.1, 0.3}) {
        SymbolicHorseshoe hs;
        try {
          hs = extract_horseshoe(SymbolicCoding::full(2), bern(p), n, eps);
        } catch (const InfeasibleError&) {
          continue;
        }
        const double h = horseshoe_entropy(hs);
        CHECK(h <= kLog2 + 1e-12);
        CHECK(h <= h2(p) + entropy_correction(hs, bern(p)) + 1e-12);
      }
    }
  }
}

TEST_CASE("exponents on the realized horseshoe are exact") {
  const auto hs = extract_horseshoe(SymbolicCoding::full(2), bern(0.7), 10, 0.05);
  CHECK(realized_exponent_deviation(hs, hs_geometry(), 4, 50, 3) <= 1e-12);
  const auto planar = ModelSystem::planar_repeller(
      {{Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 4)}, {Eigen::Vector2d(2.0 / 3.0, 0.75), Eigen::Vector2d(3, 4)}});
  CHECK(realized_exponent_deviation(hs, planar, 3, 30, 4) <= 1e-12);
}

TEST_CASE("realized set dimension equals the sum of slice dimensions") {
  const auto hs = extract_horseshoe(SymbolicCoding::full(2), bern(0.5), 4, 0.0);
  const auto d = horseshoe_dimension(hs, hs_geometry(), true);
  CHECK(d.diagnostics.count("box_unstable") == 1);
  CHECK(std::abs(d.diagnostics.at("box_unstable") - d.diagnostics.at("unstable")) <= 0.05);
  CHECK(std::abs(d.diagnostics.at("box_stable") - d.diagnostics.at("stable")) <= 0.05);
  CHECK(d.value == Approx(d.diagnostics.at("unstable") + d.diagnostics.at("stable")).epsilon(1e-15));
}

TEST_CASE("Caratheodory dimension of the realized sub-repeller matches the slice formula") {
  const auto cantor = ModelSystem::cantor_repeller({{0.0, 3.0}, {2.0 / 3.0, 3.0}});
  for (double p : {0.5, 0.7}) {
    const auto hs = extract_horseshoe(SymbolicCoding::full(2), bern(p), p == 0.5 ? 4 : 10, 0.05);
    const double moran = horseshoe_dimension(hs, cantor).value;
    const auto c = caratheodory_dimension(cantor, BlockConcatenation{hs.blocks}, 0.05);
    CAPTURE(p);
    CHECK(std::abs(c.value - moran) <= 0.03);
  }
}

TEST_CASE("realized slices have the expected point counts") {
  const auto hs = extract_horseshoe(SymbolicCoding::full(2), bern(0.5), 4, 0.0);
  CHECK(unstable_slice_points(hs, hs_geometry(), 3).size() == 216);
  CHECK(stable_slice_points(hs, hs_geometry(), 2).size() == 36);
  const auto cantor = ModelSystem::cantor_repeller({{0.0, 3.0}, {2.0 / 3.0, 3.0}});
  CHECK_THROWS_AS(stable_slice_points(hs, cantor, 2), ArgumentError);
  CHECK(horseshoe_unstable_slice(hs_geometry(), 5).size() == 32);
  CHECK_THROWS_AS(horseshoe_stable_slice(cantor, 5), ArgumentError);
}

TEST_CASE("Markov extraction") {
  const auto mu = ErgodicMeasureSpec::markov((Eigen::MatrixXd(2, 2) << 0.9, 0.1, 0.5, 0.5).finished());
  const auto full = SymbolicCoding::full(2);
  const Eigen::MatrixXd target = mu.stationary().asDiagonal() * mu.transition();
  for (int pivot : {0, 1}) {
    const int n = 12;
    const double eps = 0.05;
    const auto hs = extract_horseshoe(full, mu, n, eps, pivot);
    CHECK(hs.markov);
    // Oracle: every pivot-anchored word, cyclic pair frequencies.
    std::size_t expect = 0;
    for (unsigned m = 0; m < (1u << n); ++m) {
      Word w(n);
      for (int i = 0; i < n; ++i) w[i] = (m >> (n - 1 - i)) & 1u;
      if (w[0] != pivot) continue;
      Eigen::Matrix2d f = Eigen::Matrix2d::Zero();
      for (int i = 0; i < n; ++i) f(w[i], w[(i + 1) % n]) += 1.0 / n;
      if ((f - target).cwiseAbs().maxCoeff() <= eps + 1e-12) ++expect;
    }
    CHECK(hs.blocks.size() == expect);
    for (const auto& b : hs.blocks) CHECK(b.front() == pivot);
    CHECK(horseshoe_entropy(hs) == Approx(std::log(static_cast<double>(expect)) / n).epsilon(1e-14));
    CHECK((hs.block_transitions().array() == 1).all());
  }
}

TEST_CASE("Markov extraction on a constrained base respects admissibility") {
  SymbolicCoding golden{(Eigen::MatrixXi(2, 2) << 1, 1, 1, 0).finished()};
  const auto mu = ErgodicMeasureSpec::markov((Eigen::MatrixXd(2, 2) << 0.6, 0.4, 1.0, 0.0).finished());
  const auto hs = extract_horseshoe(golden, mu, 10, 0.1, 0);
  for (const auto& b : hs.blocks) {
    CHECK(golden.admissible(b));
    CHECK(golden.transitions(b.back(), 0) == 1);
  }
  CHECK_THROWS_AS(extract_horseshoe(golden, mu, 10, 0.1, 5), ArgumentError);
  CHECK_THROWS_AS(extract_horseshoe(golden, mu, 3, 0.0, 0), InfeasibleError);
  CHECK_THROWS_AS(extract_horseshoe(SymbolicCoding::full(2), mu, 40, 0.1, 0), PrecisionError);
}

TEST_CASE("support coverage") {
  const auto full = SymbolicCoding::full(2);
  const auto all = extract_horseshoe(full, bern(0.5), 8, 1.0);
  CHECK(support_coverage(all, full, 8) == 1.0);
  const auto hs = extract_horseshoe(full, bern(0.5), 4, 0.0);
  // Prefixes of balanced 4-blocks of length 3: every word except 000 and 111.
  CHECK(support_coverage(hs, full, 3) == Approx(6.0 / 8.0));
  CHECK(support_coverage(hs, full, 2) == 1.0);
  const auto big = extract_horseshoe(full, bern(0.7), 40, 0.05);
  CHECK(support_coverage(big, full, 10) == 1.0);
  CHECK_THROWS_AS(support_coverage(hs, full, 5), ArgumentError);
}

TEST_CASE("measure dimension") {
  CHECK(measure_dimension(hs_geometry(), bern(0.7)).value == Approx(h2(0.7) / kLog3 + h2(0.7) / kLog4).epsilon(1e-14));
  CHECK(measure_dimension(hs_geometry(), bern(0.7)).kind == DimensionKind::ledrappier_young);
  const auto cantor = ModelSystem::cantor_repeller({{0.0, 3.0}, {2.0 / 3.0, 3.0}});
  CHECK(measure_dimension(cantor, bern(0.7)).value == Approx(h2(0.7) / kLog3).epsilon(1e-14));
  CHECK(measure_dimension(cantor, bern(0.7)).kind == DimensionKind::lyapunov);
}

TEST_CASE("extraction does not depend on thread count") {
  const auto a = extract_horseshoe(SymbolicCoding::full(2), bern(0.6), 16, 0.1, 0, 1);
  const auto b = extract_horseshoe(SymbolicCoding::full(2), bern(0.6), 16, 0.1, 0, 4);
  CHECK(a.blocks == b.blocks);
  CHECK(a.block_count == b.block_count);
}
