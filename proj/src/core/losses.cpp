#include "core/losses.hpp"

#include "core/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aocids {

namespace {

struct Normalized {
  Matrix unit;
  Vector norm;  // floored norms
  std::vector<bool> floored;
};

Normalized normalize_rows(const Matrix& x) {
  Normalized out;
  out.unit.resize(x.rows(), x.cols());
  out.norm.resize(x.rows());
  out.floored.resize(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = x.row(i).norm();
    const bool f = !(n > kNormFloor);
    out.floored[static_cast<std::size_t>(i)] = f;
    out.norm[i] = f ? kNormFloor : n;
    out.unit.row(i) = x.row(i) / out.norm[i];
  }
  return out;
}

// Pulls a gradient w.r.t. unit rows back through row normalization.
Matrix normalize_backward(const Normalized& nz, const Matrix& d_unit) {
  Matrix dx(d_unit.rows(), d_unit.cols());
  for (Eigen::Index i = 0; i < d_unit.rows(); ++i) {
    if (nz.floored[static_cast<std::size_t>(i)]) {
      dx.row(i) = d_unit.row(i) / nz.norm[i];
    } else {
      const double proj = nz.unit.row(i).dot(d_unit.row(i));
      dx.row(i) = (d_unit.row(i) - proj * nz.unit.row(i)) / nz.norm[i];
    }
  }
  return dx;
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

CrcResult crc_loss(const Matrix& normal_reps, const Matrix& attack_reps, const CrcConfig& cfg) {
  require(cfg.tau > 0.0, ErrorKind::InvalidArgument, "crc loss: tau must be positive");
  const Eigen::Index n = normal_reps.rows();
  const Eigen::Index k = attack_reps.rows();
  require(k == 0 || n == 0 || normal_reps.cols() == attack_reps.cols(), ErrorKind::Shape,
          "crc loss: normal and attack representations differ in width");

  CrcResult out;
  out.grad_normal = Matrix::Zero(n, normal_reps.cols());
  out.grad_attack = Matrix::Zero(k, attack_reps.cols());
  if (n < 2) return out;

  const Normalized un = normalize_rows(normal_reps);
  const Normalized ua = normalize_rows(attack_reps);
  const double inv_tau = 1.0 / cfg.tau;
  const Matrix s = (un.unit * un.unit.transpose()) * inv_tau;
  const Matrix t = k > 0 ? Matrix((un.unit * ua.unit.transpose()) * inv_tau) : Matrix(n, 0);

  // log of the repulsion sum, per anchor row (identical across rows for the global form)
  Vector log_denom(n);
  if (cfg.denominator == CrcDenominator::Global) {
    double global = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) global = log_add_exp(global, log_sum_exp(t.row(i)));
    log_denom.setConstant(global);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) log_denom[i] = log_sum_exp(t.row(i));
  }

  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1);
  Matrix ds = Matrix::Zero(n, n);
  // per_anchor_mass[i] = sum_j e^{logD_i - L_ij}, feeds the gradient of t
  Vector mass = Vector::Zero(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ld = log_denom[i];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double sij = s(i, j);
      if (ld == -std::numeric_limits<double>::infinity()) continue;  // no attacks: term is zero
      total += softplus(ld - sij);
      ds(i, j) = -logistic(ld - sij) / pairs;
      mass[i] += std::exp(ld - log_add_exp(sij, ld));
    }
  }
  out.loss = total / pairs;

  Matrix d_un = (ds + ds.transpose()) * un.unit * inv_tau;
  if (k > 0) {
    Matrix dt(n, k);
    if (cfg.denominator == CrcDenominator::Global) {
      const double scale = mass.sum() / pairs;
      dt = (t.array() - log_denom[0]).exp() * scale;
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        dt.row(i) = (t.row(i).array() - log_denom[i]).exp() * (mass[i] / pairs);
      }
    }
    d_un += dt * ua.unit * inv_tau;
    const Matrix d_ua = dt.transpose() * un.unit * inv_tau;
    out.grad_attack = normalize_backward(ua, d_ua);
  }
  out.grad_normal = normalize_backward(un, d_un);
  return out;
}

LossResult binary_cross_entropy(const Vector& p, const Vector& y) {
  require(p.size() == y.size(), ErrorKind::Shape, "binary cross-entropy: length mismatch");
  require(p.size() > 0, ErrorKind::InvalidArgument, "binary cross-entropy: empty input");
  const double n = static_cast<double>(p.size());
  LossResult out;
  out.grad = Matrix::Zero(p.size(), 1);
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
    if (p[i] >= kProbabilityClamp && p[i] <= 1.0 - kProbabilityClamp) {
      out.grad(i, 0) = (pc - y[i]) / (pc * (1.0 - pc)) / n;
    }
  }
  out.loss = total / n;
  return out;
}

LossResult mean_squared_error(const Matrix& prediction, const Matrix& target) {
  require(prediction.rows() == target.rows() && prediction.cols() == target.cols(), ErrorKind::Shape,
          "mean squared error: shape mismatch");
  require(prediction.size() > 0, ErrorKind::InvalidArgument, "mean squared error: empty input");
  const double count = static_cast<double>(prediction.size());
  const Matrix diff = prediction - target;
  return {diff.squaredNorm() / count, diff * (2.0 / count)};
}

LossResult crc_loss_labeled(const Matrix& reps, const Vector& labels, const CrcConfig& cfg) {
  require(reps.rows() == labels.size(), ErrorKind::Shape, "crc loss: label count does not match rows");
  std::vector<Eigen::Index> normal_idx, attack_idx;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    (labels[i] >= 0.5 ? attack_idx : normal_idx).push_back(i);
  }
  const Matrix normals = reps(normal_idx, Eigen::all);
  const Matrix attacks = reps(attack_idx, Eigen::all);
  CrcResult r = crc_loss(normals, attacks, cfg);
  LossResult out{r.loss, Matrix::Zero(reps.rows(), reps.cols())};
  for (std::size_t a = 0; a < normal_idx.size(); ++a) {
    out.grad.row(normal_idx[a]) = r.grad_normal.row(static_cast<Eigen::Index>(a));
  }
  for (std::size_t a = 0; a < attack_idx.size(); ++a) {
    out.grad.row(attack_idx[a]) = r.grad_attack.row(static_cast<Eigen::Index>(a));
  }
  return out;
}

CrcObjectiveResult crc_objective(const Matrix& enc_reps, const Matrix& dec_reps, const Vector& labels,
                                 const CrcConfig& cfg) {
  require(enc_reps.rows() == dec_reps.rows(), ErrorKind::Shape, "crc objective: view row counts differ");
  LossResult enc = crc_loss_labeled(enc_reps, labels, cfg);
  LossResult dec = crc_loss_labeled(dec_reps, labels, cfg);
  CrcObjectiveResult out;
  out.encoder_loss = enc.loss;
  out.decoder_loss = dec.loss;
  out.loss = enc.loss + dec.loss;
  out.grad_enc = std::move(enc.grad);
  out.grad_dec = std::move(dec.grad);
  return out;
}

ImprovedObjectiveResult improved_objective(const Vector& p_enc, const Vector& p_dec, const Matrix& recon,
                                           const Matrix& x, const Vector& y, const ImprovedLossConfig& cfg) {
  require(cfg.lambda_enc >= 0.0 && cfg.recon_weight >= 0.0, ErrorKind::InvalidArgument,
          "improved objective: weights must be non-negative");
  const LossResult be = binary_cross_entropy(p_enc, y);
  const LossResult bd = binary_cross_entropy(p_dec, y);
  const LossResult mse = mean_squared_error(recon, x);
  ImprovedObjectiveResult out;
  out.bce_enc = be.loss;
  out.bce_dec = bd.loss;
  out.mse = mse.loss;
  out.loss = cfg.lambda_enc * 0.5 * (be.loss + bd.loss) + cfg.recon_weight * mse.loss;
  out.grad_p_enc = be.grad * (0.5 * cfg.lambda_enc);
  out.grad_p_dec = bd.grad * (0.5 * cfg.lambda_enc);
  out.grad_recon = mse.grad * cfg.recon_weight;
  return out;
}

}  // namespace aocids
