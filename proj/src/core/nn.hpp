#pragma once

// Dense layers with analytic gradients, SGD/Adam, and the LR schedule.
// Everything is double precision; batches are row-major (rows = samples).

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace aocids {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Mode { Training, Inference };

/// A trainable tensor paired with its gradient buffer.
struct ParamRef {
  Matrix* value;
  Matrix* grad;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual Matrix forward(const Matrix& x, Mode mode) = 0;
  // Accumulates parameter gradients and returns dL/dx for the last forward batch.
  virtual Matrix backward(const Matrix& upstream) = 0;

  virtual std::vector<ParamRef> params() { return {}; }
  virtual std::vector<const Matrix*> param_values() const { return {}; }
  virtual std::size_t param_count() const { return 0; }
  virtual std::string kind() const = 0;

  // Non-trainable state (running statistics) written after the parameters.
  virtual void write_state(std::ostream&) const {}
  virtual void read_state(std::istream&) {}

  void zero_grad();
};

class AffineLayer final : public Layer {
 public:
  AffineLayer(std::size_t in, std::size_t out);

  // Uniform in +-sqrt(6 / fan_in); bias starts at zero.
  void init(std::mt19937_64& rng);

  Matrix forward(const Matrix& x, Mode mode) override;
  Matrix backward(const Matrix& upstream) override;
  std::vector<ParamRef> params() override;
  std::vector<const Matrix*> param_values() const override { return {&weights_, &bias_}; }
  std::size_t param_count() const override;
  std::string kind() const override { return "affine"; }

  std::size_t in_dim() const { return static_cast<std::size_t>(weights_.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights_.rows()); }

  Matrix& weights() { return weights_; }
  Matrix& bias() { return bias_; }
  const Matrix& weight_grad() const { return weight_grad_; }
  const Matrix& bias_grad() const { return bias_grad_; }

 private:
  Matrix weights_;  // out x in
  Matrix bias_;     // 1 x out
  Matrix weight_grad_;
  Matrix bias_grad_;
  Matrix input_;
  bool has_input_ = false;
};

class BatchNormLayer final : public Layer {
 public:
  explicit BatchNormLayer(std::size_t features, double epsilon = 1e-5, double momentum = 0.1);

  Matrix forward(const Matrix& x, Mode mode) override;
  Matrix backward(const Matrix& upstream) override;
  std::vector<ParamRef> params() override;
  std::vector<const Matrix*> param_values() const override { return {&scale_, &shift_}; }
  std::size_t param_count() const override;
  std::string kind() const override { return "batchnorm"; }
  void write_state(std::ostream& os) const override;
  void read_state(std::istream& is) override;

  Matrix& scale() { return scale_; }
  Matrix& shift() { return shift_; }
  const Vector& running_mean() const { return running_mean_; }
  const Vector& running_var() const { return running_var_; }
  double epsilon() const { return epsilon_; }
  double momentum() const { return momentum_; }

 private:
  Matrix scale_;  // 1 x features
  Matrix shift_;
  Matrix scale_grad_;
  Matrix shift_grad_;
  Vector running_mean_;
  Vector running_var_;
  double epsilon_;
  double momentum_;

  Mode last_mode_ = Mode::Inference;
  Matrix normalized_;
  Vector inv_std_;
  bool has_cache_ = false;
};

enum class ActivationKind { Relu, Sigmoid };

class ActivationLayer final : public Layer {
 public:
  explicit ActivationLayer(ActivationKind kind) : kind_(kind) {}

  Matrix forward(const Matrix& x, Mode mode) override;
  Matrix backward(const Matrix& upstream) override;
  std::string kind() const override { return kind_ == ActivationKind::Relu ? "relu" : "sigmoid"; }

 private:
  ActivationKind kind_;
  Matrix cache_;  // input for relu, output for sigmoid
  bool has_cache_ = false;
};

/// Ordered layer stack.
class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Matrix forward(const Matrix& x, Mode mode);
  Matrix backward(const Matrix& upstream);
  std::vector<ParamRef> params();
  std::size_t param_count() const;
  void zero_grad();

  std::size_t size() const { return layers_.size(); }
  Layer& at(std::size_t i) { return *layers_.at(i); }
  const Layer& at(std::size_t i) const { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// u.v / (|u| |v|) with each norm floored at 1e-12.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

inline constexpr double kNormFloor = 1e-12;

enum class OptimizerKind { Sgd, Adam };

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double weight_decay);

  // Both kinds apply weight decay as an L2 term added to the gradient.
  void step(std::span<const ParamRef> params);

  void set_learning_rate(double lr) { learning_rate_ = lr; }
  double learning_rate() const { return learning_rate_; }
  double weight_decay() const { return weight_decay_; }
  OptimizerKind kind() const { return kind_; }
  std::uint64_t step_count() const { return step_count_; }

  void write(std::ostream& os) const;
  static Optimizer read(std::istream& is);

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

 private:
  OptimizerKind kind_;
  double learning_rate_;
  double weight_decay_;
  std::uint64_t step_count_ = 0;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
};

enum class ScheduleKind { Constant, Cosine };

/// Per-epoch learning-rate schedule. Cosine annealing clamps to eta_min past t_max.
struct LrSchedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double eta_initial = 1e-3;
  double eta_min = 1e-5;
  int t_max = 50;

  double lr_at(int epoch) const;
};

double cosine_anneal_lr(double eta_initial, double eta_min, int t_max, int epoch);

/// Weights, biases, scales and shifts; running statistics are excluded.
std::size_t count_parameters(const Sequential& stack);

/// Fixed-width little-endian helpers for the binary checkpoint format.
namespace binio {
void write_u64(std::ostream& os, std::uint64_t v);
std::uint64_t read_u64(std::istream& is);
void write_f64(std::ostream& os, double v);
double read_f64(std::istream& is);
void write_matrix(std::ostream& os, const Matrix& m);
void read_matrix_into(std::istream& is, Matrix& m);
void write_vector(std::ostream& os, const Vector& v);
Vector read_vector(std::istream& is);
}  // namespace binio

}  // namespace aocids
