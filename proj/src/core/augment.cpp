#include "core/augment.hpp"

#include "core/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aocids {

double sample_beta(double alpha, std::mt19937_64& rng) {
  require(alpha > 0.0, ErrorKind::InvalidArgument, "mixup: alpha must be positive");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (;;) {
    const double a = gamma(rng);
    const double b = gamma(rng);
    // Both draws can underflow to zero for small alpha; redraw.
    if (a + b > 0.0) return a / (a + b);
  }
}

MixupResult mixup_batch(const Matrix& x, const Vector& y, const MixupConfig& cfg, std::uint64_t seed,
                        std::optional<double> forced_lambda) {
  require(x.rows() == y.size(), ErrorKind::Shape, "mixup: label count does not match rows");
  require(cfg.alpha > 0.0, ErrorKind::InvalidArgument, "mixup: alpha must be positive");
  require(!forced_lambda || (*forced_lambda >= 0.0 && *forced_lambda <= 1.0), ErrorKind::InvalidArgument,
          "mixup: lambda must lie in [0, 1]");
  const auto n = static_cast<std::size_t>(x.rows());
  MixupResult out{x, y, Vector::Ones(x.rows()), {}};
  out.partner.resize(n);
  std::iota(out.partner.begin(), out.partner.end(), 0);
  if (n < 2) return out;

  std::mt19937_64 rng(seed);
  std::shuffle(out.partner.begin(), out.partner.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    const double lam = forced_lambda ? *forced_lambda : sample_beta(cfg.alpha, rng);
    const auto r = static_cast<Eigen::Index>(i);
    const auto j = static_cast<Eigen::Index>(out.partner[i]);
    out.lambda[r] = lam;
    out.x.row(r) = lam * x.row(r) + (1.0 - lam) * x.row(j);
    out.y[r] = lam * y[r] + (1.0 - lam) * y[j];
  }
  return out;
}

std::vector<int> random_label_flip(const std::vector<int>& labels, const FlipConfig& cfg, std::uint64_t seed) {
  require(cfg.flip_fraction >= 0.0 && cfg.flip_fraction <= 1.0, ErrorKind::InvalidArgument,
          "label flip: fraction must be in [0,1]");
  std::vector<int> out = labels;
  const auto count = static_cast<std::size_t>(std::floor(cfg.flip_fraction * static_cast<double>(labels.size())));
  if (count == 0) return out;
  std::vector<std::size_t> idx(labels.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample without replacement.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out[idx[i]] = 1 - out[idx[i]];
  }
  return out;
}

}  // namespace aocids
