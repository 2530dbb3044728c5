#pragma once

#include "core/nn.hpp"

#include <cstdint>
#include <optional>

namespace aocids {

struct MixupConfig {
  double alpha = 0.2;
};

struct FlipConfig {
  double flip_fraction = 0.05;
};

struct MixupResult {
  Matrix x;
  Vector y;
  Vector lambda;                     // per-row mixing weight on the row itself
  std::vector<std::size_t> partner;  // row each output was blended with
};

/// One Beta(alpha, alpha) draw via two gamma variates.
double sample_beta(double alpha, std::mt19937_64& rng);

/// Pairs every row with a row of a random permutation of the batch and blends
/// x~ = l x_i + (1 - l) x_j, y~ = l y_i + (1 - l) y_j with a fresh l ~ Beta(alpha, alpha)
/// per row. A batch of one row is returned unchanged. `forced_lambda` pins l for tests.
MixupResult mixup_batch(const Matrix& x, const Vector& y, const MixupConfig& cfg, std::uint64_t seed,
                        std::optional<double> forced_lambda = std::nullopt);

/// Flips exactly floor(flip_fraction * n) labels chosen uniformly without replacement.
std::vector<int> random_label_flip(const std::vector<int>& labels, const FlipConfig& cfg, std::uint64_t seed);

}  // namespace aocids
