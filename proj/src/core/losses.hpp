#pragma once

#include "core/nn.hpp"

namespace aocids {

/// How the repulsion term of the cluster-repelling loss is summed.
enum class CrcDenominator {
  Global,     // all normal anchors x all attack samples, shared by every pair
  PerAnchor,  // only the pair's own anchor i against all attack samples
};

struct CrcConfig {
  double tau = 0.02;
  CrcDenominator denominator = CrcDenominator::Global;
};

struct ImprovedLossConfig {
  double lambda_enc = 1.0;
  double recon_weight = 0.1;
};

struct CrcResult {
  double loss = 0.0;
  Matrix grad_normal;
  Matrix grad_attack;
};

/// Cluster-repelling contrastive loss. Averages, over ordered normal pairs (i, j), i != j,
///   -log( e^{s_ij} / (e^{s_ij} + sum_{i', k} e^{t_i'k}) )
/// with s = cos(normal_i, normal_j) / tau and t = cos(normal_i', attack_k) / tau.
/// Fewer than two normal rows gives a zero loss and zero gradients.
CrcResult crc_loss(const Matrix& normal_reps, const Matrix& attack_reps, const CrcConfig& cfg);

struct LossResult {
  double loss = 0.0;
  Matrix grad;
};

/// Mean binary cross-entropy with p clamped to [1e-7, 1 - 1e-7]. Targets may be soft.
/// The returned gradient is with respect to p (zero where the clamp is active).
LossResult binary_cross_entropy(const Vector& p, const Vector& y);

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean over all elements of (prediction - target)^2.
LossResult mean_squared_error(const Matrix& prediction, const Matrix& target);

/// Splits rows by label (y >= 0.5 is attack) and evaluates crc_loss, scattering the
/// gradients back to row order.
LossResult crc_loss_labeled(const Matrix& reps, const Vector& labels, const CrcConfig& cfg);

struct CrcObjectiveResult {
  double loss = 0.0;
  double encoder_loss = 0.0;
  double decoder_loss = 0.0;
  Matrix grad_enc;
  Matrix grad_dec;
};

/// Encoder-view loss plus decoder-view loss.
CrcObjectiveResult crc_objective(const Matrix& enc_reps, const Matrix& dec_reps, const Vector& labels,
                                 const CrcConfig& cfg);

struct ImprovedObjectiveResult {
  double loss = 0.0;
  double bce_enc = 0.0;
  double bce_dec = 0.0;
  double mse = 0.0;
  Matrix grad_p_enc;  // n x 1
  Matrix grad_p_dec;  // n x 1
  Matrix grad_recon;
};

/// lambda_enc * (BCE(p_enc, y) + BCE(p_dec, y)) / 2 + recon_weight * MSE(recon, x).
ImprovedObjectiveResult improved_objective(const Vector& p_enc, const Vector& p_dec, const Matrix& recon,
                                           const Matrix& x, const Vector& y, const ImprovedLossConfig& cfg);

}  // namespace aocids
