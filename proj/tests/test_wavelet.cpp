#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "wemsfem/wavelet.hpp"

using namespace wemsfem;
using namespace wemsfem::wavelet;

namespace {

std::vector<double> sample_identity(int cells) {
  std::vector<double> v(static_cast<std::size_t>(cells));
  for (int c = 0; c < cells; ++c) v[static_cast<std::size_t>(c)] = (c + 0.5) / cells;
  return v;
}

// Exact L2 error of x minus its level-l projection. The midpoint staircase s
// has the same cell means as x, so ||x - P s||^2 = ||s - P s||^2 + ||x - s||^2
// and the second term is cells * (1/cells)^3 / 12.
double identity_error(int level, int cells) {
  const auto s = sample_identity(cells);
  const auto approx = reconstruct(project(s, level), cells);
  const double d = l2_distance(s, approx);
  return std::sqrt(d * d + 1.0 / (12.0 * cells * cells));
}

}  // namespace

TEST_CASE("mother wavelet and scaling function values") {
  CHECK(haar_eval(1, 0, 0.25) == 1.0);
  CHECK(haar_eval(1, 0, 0.75) == -1.0);
  CHECK(haar_eval(1, 0, 0.5) == -1.0);
  CHECK(haar_eval(1, 0, 1.0) == -1.0);
  CHECK(haar_eval(0, 0, 0.0) == 1.0);
  CHECK(haar_eval(0, 0, 1.0) == 1.0);
  CHECK_THROWS(haar_eval(2, 2, 0.5));
  CHECK_THROWS(haar_eval(-1, 0, 0.5));
  CHECK(haar_eval(1, 0, 1.5) == 0.0);
}

TEST_CASE("psi_{2,1} lives on [1/2, 1] with values +-sqrt2") {
  for (int s = 0; s < 1000; ++s) {
    const double x = (s + 0.5) / 1000.0;
    const double v = haar_eval(2, 1, x);
    if (x < 0.5) CHECK(v == 0.0);
    else if (x < 0.75) CHECK(v == doctest::Approx(std::sqrt(2.0)));
    else CHECK(v == doctest::Approx(-std::sqrt(2.0)));
  }
}

TEST_CASE("unit norms by midpoint quadrature") {
  const int cells = 1 << 12;
  for (int m = 0; m <= 8; ++m) {
    const int count = m == 0 ? 1 : 1 << (m - 1);
    for (int j = 0; j < count; ++j) {
      double sum = 0.0;
      for (int c = 0; c < cells; ++c) {
        const double v = haar_eval(m, j, (c + 0.5) / cells);
        sum += v * v / cells;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("Gram matrix is the identity") {
  const int cells = 1 << 12;
  for (int level = 0; level <= 8; ++level) {
    const HaarBasis basis(level);
    REQUIRE(basis.dim() == 1 << level);
    std::vector<std::vector<double>> table(static_cast<std::size_t>(basis.dim()),
                                           std::vector<double>(static_cast<std::size_t>(cells)));
    for (int f = 0; f < basis.dim(); ++f)
      for (int c = 0; c < cells; ++c)
        table[static_cast<std::size_t>(f)][static_cast<std::size_t>(c)] = basis.eval(f, (c + 0.5) / cells);
    double worst = 0.0;
    for (int a = 0; a < basis.dim(); ++a)
      for (int b = a; b < basis.dim(); ++b) {
        double g = 0.0;
        for (int c = 0; c < cells; ++c)
          g += table[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)] *
               table[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)];
        g /= cells;
        worst = std::max(worst, std::abs(g - (a == b ? 1.0 : 0.0)));
      }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("exact integrals") {
  CHECK(haar_integral(1, 0, 0.0, 1.0) == doctest::Approx(0.0));
  CHECK(haar_integral(1, 0, 0.0, 0.5) == doctest::Approx(0.5));
  CHECK(haar_integral(2, 1, 0.5, 0.6) == doctest::Approx(0.1 * std::sqrt(2.0)));
  CHECK(haar_integral(3, 0, 0.5, 1.0) == 0.0);
}

TEST_CASE("flat index round trip") {
  for (int f = 0; f < 512; ++f) CHECK(flat_index(from_flat(f)) == f);
  CHECK(flat_index({0, 0}) == 0);
  CHECK(flat_index({1, 0}) == 1);
  CHECK(flat_index({3, 2}) == 6);
}

TEST_CASE("projection of x matches the best-approximation formula") {
  const int cells = 1 << 20;
  double previous = 0.0;
  for (int level = 1; level <= 8; ++level) {
    const double err = identity_error(level, cells);
    const double expected = std::ldexp(1.0, -level) / (2.0 * std::sqrt(3.0));
    CHECK(std::abs(err - expected) <= 1e-3 * expected);
    if (level >= 2) CHECK(std::abs(err / previous - 0.5) <= 0.025);
    previous = err;
  }
  // Without the sub-cell correction the staircase alone is already close at 2^10 cells.
  const auto s = sample_identity(1 << 10);
  const double coarse = l2_distance(s, reconstruct(project(s, 2), 1 << 10));
  CHECK(std::abs(coarse - 0.25 / (2.0 * std::sqrt(3.0))) <= 1e-3 * coarse);
}

TEST_CASE("constants, reproduction and nesting") {
  const int cells = 256;
  const std::vector<double> flat(cells, 2.5);
  const auto c = project(flat, 5);
  CHECK(c[0] == doctest::Approx(2.5));
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(std::abs(c[i]) <= 1e-14);
  for (double v : reconstruct(c, cells)) CHECK(v == doctest::Approx(2.5));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int level = 0; level <= 6; ++level) {
    std::vector<double> coeffs(static_cast<std::size_t>(1 << level));
    for (double& x : coeffs) x = u(rng);
    const auto v = reconstruct(coeffs, cells);
    const auto back = reconstruct(project(v, level), cells);
    CHECK(l2_distance(v, back) <= 1e-13);
  }

  std::vector<double> noise(cells);
  for (double& x : noise) x = u(rng);
  for (int level = 0; level < 7; ++level) {
    const auto fine = project(noise, level + 1);
    const auto coarse = project(noise, level);
    for (std::size_t i = 0; i < coarse.size(); ++i) CHECK(std::abs(fine[i] - coarse[i]) <= 1e-14);
  }
}

TEST_CASE("coefficients agree with direct inner products") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int cells = 128;
  std::vector<double> v(cells);
  for (double& x : v) x = u(rng);
  const HaarBasis basis(5);
  const auto c = project(v, 5);
  for (int f = 0; f < basis.dim(); ++f) {
    double direct = 0.0;
    for (int i = 0; i < cells; ++i) direct += v[static_cast<std::size_t>(i)] * basis.eval(f, (i + 0.5) / cells) / cells;
    CHECK(std::abs(c[static_cast<std::size_t>(f)] - direct) <= 1e-14);
  }
}

TEST_CASE("grid errors") {
  const std::vector<double> bad(6, 1.0);
  CHECK_THROWS(project(bad, 1));
  const std::vector<double> short_grid(4, 1.0);
  CHECK_THROWS(project(short_grid, 3));
  CHECK_THROWS(reconstruct(std::vector<double>(4, 0.0), 6));
}
