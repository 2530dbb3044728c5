#include "core/nn.hpp"

#include "core/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

namespace aocids {

void Layer::zero_grad() {
  for (auto& p : params()) p.grad->setZero();
}

// ---------------------------------------------------------------- affine

AffineLayer::AffineLayer(std::size_t in, std::size_t out)
    : weights_(Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in))),
      bias_(Matrix::Zero(1, static_cast<Eigen::Index>(out))),
      weight_grad_(Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in))),
      bias_grad_(Matrix::Zero(1, static_cast<Eigen::Index>(out))) {
  require(in > 0 && out > 0, ErrorKind::InvalidArgument, "affine layer dimensions must be positive");
}

void AffineLayer::init(std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < weights_.size(); ++i) weights_.data()[i] = dist(rng);
  bias_.setZero();
}

Matrix AffineLayer::forward(const Matrix& x, Mode) {
  require(static_cast<std::size_t>(x.cols()) == in_dim(), ErrorKind::Shape,
          "affine forward: expected " + std::to_string(in_dim()) + " columns, got " +
              std::to_string(x.cols()));
  input_ = x;
  has_input_ = true;
  Matrix out = x * weights_.transpose();
  out.rowwise() += bias_.row(0);
  return out;
}

Matrix AffineLayer::backward(const Matrix& upstream) {
  require(has_input_, ErrorKind::State, "affine backward called without a cached forward pass");
  require(upstream.rows() == input_.rows() && static_cast<std::size_t>(upstream.cols()) == out_dim(),
          ErrorKind::Shape, "affine backward: upstream gradient shape mismatch");
  weight_grad_.noalias() += upstream.transpose() * input_;
  bias_grad_.row(0) += upstream.colwise().sum();
  return upstream * weights_;
}

std::vector<ParamRef> AffineLayer::params() {
  return {{&weights_, &weight_grad_}, {&bias_, &bias_grad_}};
}

std::size_t AffineLayer::param_count() const {
  return static_cast<std::size_t>(weights_.size() + bias_.size());
}

// ------------------------------------------------------------ batch norm

BatchNormLayer::BatchNormLayer(std::size_t features, double epsilon, double momentum)
    : scale_(Matrix::Ones(1, static_cast<Eigen::Index>(features))),
      shift_(Matrix::Zero(1, static_cast<Eigen::Index>(features))),
      scale_grad_(Matrix::Zero(1, static_cast<Eigen::Index>(features))),
      shift_grad_(Matrix::Zero(1, static_cast<Eigen::Index>(features))),
      running_mean_(Vector::Zero(static_cast<Eigen::Index>(features))),
      running_var_(Vector::Ones(static_cast<Eigen::Index>(features))),
      epsilon_(epsilon),
      momentum_(momentum) {
  require(features > 0, ErrorKind::InvalidArgument, "batch norm needs at least one feature");
  require(epsilon >= 0.0 && momentum >= 0.0 && momentum <= 1.0, ErrorKind::InvalidArgument,
          "batch norm epsilon/momentum out of range");
}

Matrix BatchNormLayer::forward(const Matrix& x, Mode mode) {
  require(x.cols() == scale_.cols(), ErrorKind::Shape, "batch norm forward: feature count mismatch");
  const Eigen::Index n = x.rows();
  last_mode_ = mode;
  if (mode == Mode::Training) {
    require(n >= 2, ErrorKind::InvalidArgument, "batch norm in training mode needs a batch of at least 2");
    const Eigen::RowVectorXd mean = x.colwise().mean();
    Matrix centered = x.rowwise() - mean;
    const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
    inv_std_ = (var.array() + epsilon_).rsqrt().transpose();
    normalized_ = centered.array().rowwise() * inv_std_.transpose().array();
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
    running_mean_ = (1.0 - momentum_) * running_mean_ + momentum_ * mean.transpose();
    running_var_ = (1.0 - momentum_) * running_var_ + momentum_ * unbias * var.transpose();
  } else {
    inv_std_ = (running_var_.array() + epsilon_).rsqrt();
    normalized_ = (x.rowwise() - running_mean_.transpose()).array().rowwise() * inv_std_.transpose().array();
  }
  has_cache_ = true;
  Matrix out = normalized_.array().rowwise() * scale_.row(0).array();
  out.rowwise() += shift_.row(0);
  return out;
}

Matrix BatchNormLayer::backward(const Matrix& upstream) {
  require(has_cache_, ErrorKind::State, "batch norm backward called without a cached forward pass");
  require(upstream.rows() == normalized_.rows() && upstream.cols() == normalized_.cols(), ErrorKind::Shape,
          "batch norm backward: upstream gradient shape mismatch");
  scale_grad_.row(0) += (upstream.array() * normalized_.array()).colwise().sum().matrix();
  shift_grad_.row(0) += upstream.colwise().sum();

  const Matrix dnorm = upstream.array().rowwise() * scale_.row(0).array();
  if (last_mode_ == Mode::Inference) {
    return dnorm.array().rowwise() * inv_std_.transpose().array();
  }
  // dx = inv_std / N * (N dnorm - sum(dnorm) - xhat * sum(dnorm * xhat))
  const double n = static_cast<double>(upstream.rows());
  const Eigen::RowVectorXd sum_d = dnorm.colwise().sum();
  const Eigen::RowVectorXd sum_dx = (dnorm.array() * normalized_.array()).colwise().sum().matrix();
  Matrix dx = (n * dnorm).rowwise() - sum_d;
  dx -= (normalized_.array().rowwise() * sum_dx.array()).matrix();
  dx = dx.array().rowwise() * (inv_std_.transpose().array() / n);
  return dx;
}

std::vector<ParamRef> BatchNormLayer::params() {
  return {{&scale_, &scale_grad_}, {&shift_, &shift_grad_}};
}

std::size_t BatchNormLayer::param_count() const {
  return static_cast<std::size_t>(scale_.size() + shift_.size());
}

void BatchNormLayer::write_state(std::ostream& os) const {
  binio::write_vector(os, running_mean_);
  binio::write_vector(os, running_var_);
}

void BatchNormLayer::read_state(std::istream& is) {
  Vector mean = binio::read_vector(is);
  Vector var = binio::read_vector(is);
  require(mean.size() == running_mean_.size() && var.size() == running_var_.size(), ErrorKind::Parse,
          "checkpoint: batch norm running statistics have the wrong size");
  running_mean_ = std::move(mean);
  running_var_ = std::move(var);
}

// ------------------------------------------------------------ activation

Matrix ActivationLayer::forward(const Matrix& x, Mode) {
  has_cache_ = true;
  if (kind_ == ActivationKind::Relu) {
    cache_ = x;
    return x.cwiseMax(0.0);
  }
  cache_ = x.unaryExpr([](double v) {
    // Split by sign so exp never overflows.
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  return cache_;
}

Matrix ActivationLayer::backward(const Matrix& upstream) {
  require(has_cache_, ErrorKind::State, "activation backward called without a cached forward pass");
  require(upstream.rows() == cache_.rows() && upstream.cols() == cache_.cols(), ErrorKind::Shape,
          "activation backward: upstream gradient shape mismatch");
  if (kind_ == ActivationKind::Relu) {
    return (cache_.array() > 0.0).select(upstream, 0.0);
  }
  return upstream.array() * cache_.array() * (1.0 - cache_.array());
}

// ------------------------------------------------------------ sequential

Matrix Sequential::forward(const Matrix& x, Mode mode) {
  Matrix h = x;
  for (auto& layer : layers_) h = layer->forward(h, mode);
  return h;
}

Matrix Sequential::backward(const Matrix& upstream) {
  Matrix g = upstream;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<ParamRef> Sequential::params() {
  std::vector<ParamRef> out;
  for (auto& layer : layers_) {
    auto p = layer->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::size_t Sequential::param_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers_) total += layer->param_count();
  return total;
}

void Sequential::zero_grad() {
  for (auto& layer : layers_) layer->zero_grad();
}

std::size_t count_parameters(const Sequential& stack) { return stack.param_count(); }

// ------------------------------------------------------------ similarity

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), ErrorKind::Shape, "cosine similarity: vectors differ in length");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  const double nu = std::max(std::sqrt(uu), kNormFloor);
  const double nv = std::max(std::sqrt(vv), kNormFloor);
  return dot / (nu * nv);
}

// ------------------------------------------------------------ optimizers

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, double weight_decay)
    : kind_(kind), learning_rate_(learning_rate), weight_decay_(weight_decay) {
  require(learning_rate >= 0.0 && weight_decay >= 0.0, ErrorKind::InvalidArgument,
          "optimizer learning rate and weight decay must be non-negative");
}

void Optimizer::step(std::span<const ParamRef> params) {
  for (const auto& p : params) {
    require(p.value->rows() == p.grad->rows() && p.value->cols() == p.grad->cols(), ErrorKind::Shape,
            "optimizer step: gradient shape does not match parameter");
  }
  ++step_count_;
  if (kind_ == OptimizerKind::Sgd) {
    for (const auto& p : params) {
      *p.value -= learning_rate_ * (*p.grad + weight_decay_ * *p.value);
    }
    return;
  }

  if (first_moment_.empty()) {
    for (const auto& p : params) {
      first_moment_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      second_moment_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    }
  }
  require(first_moment_.size() == params.size(), ErrorKind::State,
          "optimizer step: parameter list changed between steps");

  const double t = static_cast<double>(step_count_);
  const double correct1 = 1.0 - std::pow(kBeta1, t);
  const double correct2 = 1.0 - std::pow(kBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& value = *params[i].value;
    Matrix& m = first_moment_[i];
    Matrix& v = second_moment_[i];
    require(m.rows() == value.rows() && m.cols() == value.cols(), ErrorKind::Shape,
            "optimizer step: moment shape does not match parameter");
    const Matrix g = *params[i].grad + weight_decay_ * value;
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
    value.array() -= learning_rate_ * (m.array() / correct1) / ((v.array() / correct2).sqrt() + kEpsilon);
  }
}

void Optimizer::write(std::ostream& os) const {
  binio::write_u64(os, kind_ == OptimizerKind::Sgd ? 0 : 1);
  binio::write_f64(os, learning_rate_);
  binio::write_f64(os, weight_decay_);
  binio::write_u64(os, step_count_);
  binio::write_u64(os, first_moment_.size());
  for (std::size_t i = 0; i < first_moment_.size(); ++i) {
    binio::write_u64(os, static_cast<std::uint64_t>(first_moment_[i].rows()));
    binio::write_u64(os, static_cast<std::uint64_t>(first_moment_[i].cols()));
    binio::write_matrix(os, first_moment_[i]);
    binio::write_matrix(os, second_moment_[i]);
  }
}

Optimizer Optimizer::read(std::istream& is) {
  const auto kind = binio::read_u64(is);
  require(kind <= 1, ErrorKind::Parse, "checkpoint: unknown optimizer kind");
  const double lr = binio::read_f64(is);
  const double wd = binio::read_f64(is);
  Optimizer opt(kind == 0 ? OptimizerKind::Sgd : OptimizerKind::Adam, lr, wd);
  opt.step_count_ = binio::read_u64(is);
  const auto n = binio::read_u64(is);
  require(n < (1u << 20), ErrorKind::Parse, "checkpoint: implausible optimizer moment count");
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto rows = static_cast<Eigen::Index>(binio::read_u64(is));
    const auto cols = static_cast<Eigen::Index>(binio::read_u64(is));
    Matrix m(rows, cols), v(rows, cols);
    binio::read_matrix_into(is, m);
    binio::read_matrix_into(is, v);
    opt.first_moment_.push_back(std::move(m));
    opt.second_moment_.push_back(std::move(v));
  }
  return opt;
}

// ------------------------------------------------------------ schedule

double cosine_anneal_lr(double eta_initial, double eta_min, int t_max, int epoch) {
  require(t_max > 0, ErrorKind::InvalidArgument, "cosine schedule needs t_max > 0");
  require(epoch >= 0, ErrorKind::InvalidArgument, "cosine schedule epoch must be non-negative");
  if (epoch >= t_max) return eta_min;
  const double phase = std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(t_max);
  return eta_min + 0.5 * (eta_initial - eta_min) * (1.0 + std::cos(phase));
}

double LrSchedule::lr_at(int epoch) const {
  if (kind == ScheduleKind::Constant) return eta_initial;
  return cosine_anneal_lr(eta_initial, eta_min, t_max, epoch);
}

// ------------------------------------------------------------ binary io

namespace binio {

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  require(is.gcount() == 8, ErrorKind::Parse, "checkpoint: unexpected end of file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }

double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

void write_matrix(std::ostream& os, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) write_f64(os, m.data()[i]);
}

void read_matrix_into(std::istream& is, Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = read_f64(is);
}

void write_vector(std::ostream& os, const Vector& v) {
  write_u64(os, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) write_f64(os, v[i]);
}

Vector read_vector(std::istream& is) {
  const auto n = read_u64(is);
  require(n < (1u << 28), ErrorKind::Parse, "checkpoint: implausible vector length");
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = read_f64(is);
  return v;
}

}  // namespace binio

}  // namespace aocids
