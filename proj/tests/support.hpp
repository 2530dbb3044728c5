#pragma once

#include "core/adm.hpp"
#include "core/nn.hpp"
#include "tempdir.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace testsupport {

using aocids::Matrix;
using aocids::Vector;

inline constexpr double kFdStep = 1e-5;
inline constexpr double kGradTolerance = 1e-4;

/// Central finite differences of a scalar function with respect to every entry of `m`.
/// `m` is perturbed in place and restored.
inline Matrix numeric_gradient(Matrix& m, const std::function<double()>& f, double h = kFdStep) {
  Matrix g(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double saved = m(r, c);
      m(r, c) = saved + h;
      const double up = f();
      m(r, c) = saved - h;
      const double down = f();
      m(r, c) = saved;
      g(r, c) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

inline Vector numeric_gradient(Vector& v, const std::function<double()>& f, double h = kFdStep) {
  Vector g(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double saved = v[i];
    v[i] = saved + h;
    const double up = f();
    v[i] = saved - h;
    const double down = f();
    v[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Norm-wise relative error ||a - n|| / max(||a||, ||n||); 0 when both vanish.
template <typename A, typename B>
double relative_error(const A& analytic, const B& numeric) {
  const double scale = std::max(analytic.norm(), numeric.norm());
  if (scale < 1e-12) return 0.0;
  return (analytic - numeric).norm() / scale;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = d(rng);
  }
  return m;
}

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

/// Pins both head outputs to constants: zero weights, bias logit(p). Heads are the last four tensors.
inline void pin_heads(aocids::AutoencoderModel& m, double p_enc, double p_dec) {
  auto params = m.params();
  const std::size_t n = params.size();
  params[n - 4].value->setZero();
  params[n - 3].value->setConstant(std::log(p_enc / (1.0 - p_enc)));
  params[n - 2].value->setZero();
  params[n - 1].value->setConstant(std::log(p_dec / (1.0 - p_dec)));
}

}  // namespace testsupport
