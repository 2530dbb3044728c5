#include "core/augment.hpp"
#include "core/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace aocids;
using namespace testsupport;

namespace {

// Simpson integration of the Beta(a, a) density over [lo, hi].
double beta_mass(double a, double lo, double hi) {
  const int n = 20000;
  const double h = (hi - lo) / n;
  auto pdf = [a](double x) { return std::pow(x, a - 1.0) * std::pow(1.0 - x, a - 1.0) / std::beta(a, a); };
  double s = pdf(lo) + pdf(hi);
  for (int i = 1; i < n; ++i) s += pdf(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

int hamming(const std::vector<int>& a, const std::vector<int>& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

}  // namespace

TEST_SUITE("mixup") {
  TEST_CASE("lambda of one is the identity") {
    std::mt19937_64 rng(1);
    const Matrix x = random_matrix(6, 3, rng);
    Vector y(6);
    y << 0, 1, 0, 1, 1, 0;
    const MixupResult r = mixup_batch(x, y, {}, 5, 1.0);
    CHECK(r.x == x);
    CHECK(r.y == y);
  }

  TEST_CASE("midpoint of two opposite rows") {
    Matrix x(2, 2);
    x << 1, 0, 0, 1;
    Vector y(2);
    y << 0, 1;
    // Search seeds for a permutation that pairs row 0 with row 1.
    bool found = false;
    for (std::uint64_t seed = 0; seed < 50 && !found; ++seed) {
      const MixupResult r = mixup_batch(x, y, {}, seed, 0.5);
      if (r.partner[0] != 1) continue;
      found = true;
      CHECK(r.x(0, 0) == 0.5);
      CHECK(r.x(0, 1) == 0.5);
      CHECK(r.y[0] == 0.5);
    }
    CHECK(found);
  }

  TEST_CASE("property: outputs are the stated convex blends") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed);
      const Matrix x = random_matrix(9, 4, rng);
      Vector y(9);
      for (int i = 0; i < 9; ++i) y[i] = (i * 7 + static_cast<int>(seed)) % 2;
      const MixupResult r = mixup_batch(x, y, {0.2}, seed);
      REQUIRE(r.x.rows() == 9);
      std::set<std::size_t> partners(r.partner.begin(), r.partner.end());
      CHECK(partners.size() == 9);
      for (int i = 0; i < 9; ++i) {
        const double l = r.lambda[i];
        const auto j = static_cast<Eigen::Index>(r.partner[static_cast<std::size_t>(i)]);
        CHECK(l >= 0.0);
        CHECK(l <= 1.0);
        CHECK(r.x.row(i).isApprox(l * x.row(i) + (1.0 - l) * x.row(j), 1e-12));
        CHECK(r.y[i] == doctest::Approx(l * y[i] + (1.0 - l) * y[j]).epsilon(1e-12));
        CHECK(r.y[i] >= 0.0);
        CHECK(r.y[i] <= 1.0);
        for (Eigen::Index c = 0; c < 4; ++c) {
          CHECK(r.x(i, c) >= std::min(x(i, c), x(j, c)) - 1e-12);
          CHECK(r.x(i, c) <= std::max(x(i, c), x(j, c)) + 1e-12);
        }
      }
    }
  }

  TEST_CASE("deterministic given the seed") {
    std::mt19937_64 rng(3);
    const Matrix x = random_matrix(10, 3, rng);
    const Vector y = Vector::Zero(10);
    const MixupResult a = mixup_batch(x, y, {}, 42);
    const MixupResult b = mixup_batch(x, y, {}, 42);
    const MixupResult c = mixup_batch(x, y, {}, 43);
    CHECK(a.x == b.x);
    CHECK(a.lambda == b.lambda);
    CHECK(a.x != c.x);
  }

  TEST_CASE("single-row batch is returned unchanged") {
    Matrix x(1, 3);
    x << 1, 2, 3;
    Vector y(1);
    y << 1;
    const MixupResult r = mixup_batch(x, y, {}, 0);
    CHECK(r.x == x);
    CHECK(r.y == y);
  }

  TEST_CASE("shape mismatch and invalid parameters are errors") {
    CHECK_THROWS_AS(mixup_batch(Matrix::Zero(3, 2), Vector::Zero(2), {}, 0), Error);
    CHECK_THROWS_AS(mixup_batch(Matrix::Zero(3, 2), Vector::Zero(3), {0.0}, 0), Error);
    CHECK_THROWS_AS(mixup_batch(Matrix::Zero(3, 2), Vector::Zero(3), {}, 0, 1.5), Error);
  }
}

TEST_SUITE("beta sampling") {
  TEST_CASE("U-shaped draws at alpha 0.2") {
    const double expected_outside = 1.0 - beta_mass(0.2, 0.1, 0.9);
    CHECK(expected_outside > 0.6);
    std::mt19937_64 rng(2024);
    double sum = 0.0;
    int outside = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double l = sample_beta(0.2, rng);
      REQUIRE(l >= 0.0);
      REQUIRE(l <= 1.0);
      sum += l;
      outside += (l <= 0.1 || l >= 0.9) ? 1 : 0;
    }
    CHECK(std::abs(sum / n - 0.5) <= 0.02);
    CHECK(static_cast<double>(outside) / n >= 0.6);
    CHECK(std::abs(static_cast<double>(outside) / n - expected_outside) <= 0.01);
  }

  TEST_CASE("variance matches the closed form for several alphas") {
    for (double a : {0.2, 1.0, 4.0}) {
      std::mt19937_64 rng(7);
      double s = 0, s2 = 0;
      const int n = 50000;
      for (int i = 0; i < n; ++i) {
        const double l = sample_beta(a, rng);
        s += l;
        s2 += l * l;
      }
      const double mean = s / n;
      const double var = s2 / n - mean * mean;
      CHECK(var == doctest::Approx(1.0 / (4.0 * (2.0 * a + 1.0))).epsilon(0.05));
    }
  }
}

TEST_SUITE("label flipping") {
  TEST_CASE("fraction zero and one") {
    const std::vector<int> y = {0, 1, 1, 0, 1};
    CHECK(random_label_flip(y, {0.0}, 1) == y);
    CHECK(random_label_flip(y, {1.0}, 1) == std::vector<int>{1, 0, 0, 1, 0});
  }

  TEST_CASE("exact flip count") {
    std::vector<int> y(2784);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 3 == 0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(hamming(y, random_label_flip(y, {0.05}, seed)) == 139);
  }

  TEST_CASE("property: hamming distance is floor(fraction * n)") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> f(0.0, 1.0);
    std::uniform_int_distribution<int> len(1, 500);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<int> y(static_cast<std::size_t>(len(rng)));
      for (auto& v : y) v = static_cast<int>(rng() & 1);
      const double frac = f(rng);
      const auto out = random_label_flip(y, {frac}, static_cast<std::uint64_t>(trial));
      CHECK(hamming(y, out) == static_cast<int>(std::floor(frac * static_cast<double>(y.size()))));
    }
  }

  TEST_CASE("deterministic and roughly uniform over positions") {
    const std::vector<int> y(20, 0);
    CHECK(random_label_flip(y, {0.25}, 3) == random_label_flip(y, {0.25}, 3));
    std::vector<int> hits(20, 0);
    for (std::uint64_t seed = 0; seed < 4000; ++seed) {
      const auto out = random_label_flip(y, {0.25}, seed);
      for (std::size_t i = 0; i < 20; ++i) hits[i] += out[i];
    }
    // Each position is flipped with probability 5/20.
    for (int h : hits) CHECK(std::abs(h / 4000.0 - 0.25) < 0.03);
  }

  TEST_CASE("fraction outside the unit interval is an error") {
    CHECK_THROWS_AS(random_label_flip({0, 1}, {-0.1}, 0), Error);
    CHECK_THROWS_AS(random_label_flip({0, 1}, {1.1}, 0), Error);
  }
}
