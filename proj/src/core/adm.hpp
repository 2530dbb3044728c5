#pragma once

#include "core/nn.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace aocids {

/// Encoder hidden sizes; the decoder mirrors them. hidden_dims.back() is the bottleneck.
struct ArchitectureSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  bool with_heads = false;
  bool batch_norm = true;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;

  std::size_t bottleneck() const { return hidden_dims.back(); }
  void validate() const;

  /// [input -> 128 -> 64 -> 128 -> input], no heads.
  static ArchitectureSpec base(std::size_t input_dim);
  /// [input -> 64 -> 32 -> 64 -> input] with both sigmoid heads.
  static ArchitectureSpec lite(std::size_t input_dim);
};

struct ForwardOutputs {
  Matrix enc;    // n x bottleneck
  Matrix recon;  // n x input_dim
  Vector p_enc;  // empty without heads
  Vector p_dec;
};

/// Upstream gradients for a backward pass; empty members contribute nothing.
struct OutputGradients {
  Matrix enc;
  Matrix recon;
  Matrix p_enc;  // n x 1
  Matrix p_dec;
};

/// Mirrored autoencoder: every hidden layer is affine -> batch norm -> ReLU, the output
/// layer is affine only. Optional heads: clf_enc (bottleneck -> 1) and clf_dec
/// (input -> 1, fed by the reconstruction), each followed by a sigmoid.
class AutoencoderModel {
 public:
  static AutoencoderModel build(const ArchitectureSpec& spec, std::uint64_t seed);

  AutoencoderModel(AutoencoderModel&&) noexcept = default;
  AutoencoderModel& operator=(AutoencoderModel&&) noexcept = default;

  ForwardOutputs forward(const Matrix& x, Mode mode);
  void backward(const OutputGradients& grads);

  std::vector<ParamRef> params();
  void zero_grad();
  std::size_t param_count() const;
  const ArchitectureSpec& spec() const { return spec_; }
  bool has_heads() const { return spec_.with_heads; }

  void write(std::ostream& os) const;
  static AutoencoderModel read(std::istream& is);

 private:
  explicit AutoencoderModel(ArchitectureSpec spec) : spec_(std::move(spec)) {}
  std::vector<Layer*> all_layers();
  std::vector<const Layer*> all_layers() const;

  ArchitectureSpec spec_;
  Sequential encoder_;
  Sequential decoder_;
  Sequential head_enc_;
  Sequential head_dec_;
};

std::size_t count_parameters(const AutoencoderModel& model);

enum class View { Encoder, Decoder };

struct ClassGaussian {
  double mean = 0.0;
  double stddev = 1.0;
  double prior = 0.5;
};

inline constexpr double kStddevFloor = 1e-6;

struct ViewDecision {
  ClassGaussian normal;
  ClassGaussian attack;
  Vector reference;  // mean normal representation
};

struct GaussianDecision {
  ViewDecision encoder;
  ViewDecision decoder;

  const ViewDecision& view(View v) const { return v == View::Encoder ? encoder : decoder; }
};

/// Closed-form per-class MLE over scores: sample mean, population std (floored), class frequency.
void fit_class_gaussians(const Vector& scores, const Vector& labels, ClassGaussian& normal, ClassGaussian& attack);

/// Cosine similarity of every row to `reference`.
Vector cosine_scores(const Matrix& reps, const Vector& reference);

/// Reference = mean of normal rows; Gaussians fitted on cosine scores against it.
ViewDecision fit_view_decision(const Matrix& reps, const Vector& labels);

/// Fits both views from the model's inference-mode outputs on labelled data.
GaussianDecision fit_gaussian_decision(AutoencoderModel& model, const Matrix& x, const Vector& labels);

struct ViewVerdict {
  int label = 1;
  double confidence = 0.5;
  double posterior_normal = 0.5;
  double posterior_attack = 0.5;
};

/// Posterior over {normal, attack}; exact ties go to attack.
ViewVerdict gaussian_posterior_classify(const ViewDecision& vd, double score);

struct Verdict {
  int label = 1;
  double confidence = 0.5;
  ViewVerdict encoder;
  ViewVerdict decoder;
};

/// The more confident view wins; equal confidence goes to the encoder.
Verdict confidence_vote(const ViewVerdict& enc, const ViewVerdict& dec);

/// label = p >= 0.5, confidence = max(p, 1 - p).
ViewVerdict head_verdict(double p);

enum class DecisionMode { Gaussian, Heads };

/// Inference-mode classification of every row.
std::vector<Verdict> predict(AutoencoderModel& model, const GaussianDecision* decision, DecisionMode mode,
                             const Matrix& x);

std::vector<int> verdict_labels(const std::vector<Verdict>& verdicts);

struct Checkpoint {
  AutoencoderModel model;
  std::optional<Optimizer> optimizer;
  std::optional<GaussianDecision> decision;
};

inline constexpr std::uint64_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const AutoencoderModel& model, const Optimizer* optimizer,
                     const GaussianDecision* decision);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aocids
