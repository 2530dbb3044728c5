#include "core/adm.hpp"

#include "core/error.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace aocids {

// ---------------------------------------------------------------- architecture

void ArchitectureSpec::validate() const {
  require(input_dim > 0, ErrorKind::InvalidArgument, "architecture: input_dim must be positive");
  require(!hidden_dims.empty(), ErrorKind::InvalidArgument, "architecture: hidden_dims must not be empty");
  for (auto h : hidden_dims) require(h > 0, ErrorKind::InvalidArgument, "architecture: hidden sizes must be positive");
}

ArchitectureSpec ArchitectureSpec::base(std::size_t input_dim) {
  ArchitectureSpec s;
  s.input_dim = input_dim;
  s.hidden_dims = {128, 64};
  s.with_heads = false;
  return s;
}

ArchitectureSpec ArchitectureSpec::lite(std::size_t input_dim) {
  ArchitectureSpec s;
  s.input_dim = input_dim;
  s.hidden_dims = {64, 32};
  s.with_heads = true;
  return s;
}

namespace {

void add_hidden(Sequential& stack, std::size_t in, std::size_t out, const ArchitectureSpec& spec) {
  stack.add(std::make_unique<AffineLayer>(in, out));
  if (spec.batch_norm) stack.add(std::make_unique<BatchNormLayer>(out, spec.bn_epsilon, spec.bn_momentum));
  stack.add(std::make_unique<ActivationLayer>(ActivationKind::Relu));
}

void init_affine(Sequential& stack, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (auto* a = dynamic_cast<AffineLayer*>(&stack.at(i))) a->init(rng);
  }
}

Vector first_column(const Matrix& m) { return m.col(0); }

}  // namespace

AutoencoderModel AutoencoderModel::build(const ArchitectureSpec& spec, std::uint64_t seed) {
  spec.validate();
  AutoencoderModel m(spec);
  std::size_t prev = spec.input_dim;
  for (auto h : spec.hidden_dims) {
    add_hidden(m.encoder_, prev, h, spec);
    prev = h;
  }
  for (auto it = spec.hidden_dims.rbegin() + 1; it != spec.hidden_dims.rend(); ++it) {
    add_hidden(m.decoder_, prev, *it, spec);
    prev = *it;
  }
  m.decoder_.add(std::make_unique<AffineLayer>(prev, spec.input_dim));
  if (spec.with_heads) {
    m.head_enc_.add(std::make_unique<AffineLayer>(spec.bottleneck(), 1));
    m.head_enc_.add(std::make_unique<ActivationLayer>(ActivationKind::Sigmoid));
    m.head_dec_.add(std::make_unique<AffineLayer>(spec.input_dim, 1));
    m.head_dec_.add(std::make_unique<ActivationLayer>(ActivationKind::Sigmoid));
  }

  std::mt19937_64 rng(seed);
  init_affine(m.encoder_, rng);
  init_affine(m.decoder_, rng);
  init_affine(m.head_enc_, rng);
  init_affine(m.head_dec_, rng);
  return m;
}

ForwardOutputs AutoencoderModel::forward(const Matrix& x, Mode mode) {
  require(static_cast<std::size_t>(x.cols()) == spec_.input_dim, ErrorKind::Shape,
          "model forward: expected " + std::to_string(spec_.input_dim) + " features, got " +
              std::to_string(x.cols()));
  ForwardOutputs out;
  out.enc = encoder_.forward(x, mode);
  out.recon = decoder_.forward(out.enc, mode);
  if (spec_.with_heads) {
    out.p_enc = first_column(head_enc_.forward(out.enc, mode));
    out.p_dec = first_column(head_dec_.forward(out.recon, mode));
  }
  return out;
}

void AutoencoderModel::backward(const OutputGradients& grads) {
  const Eigen::Index n = std::max({grads.enc.rows(), grads.recon.rows(), grads.p_enc.rows(), grads.p_dec.rows()});
  Matrix d_enc = grads.enc.size() ? grads.enc : Matrix::Zero(n, static_cast<Eigen::Index>(spec_.bottleneck()));
  Matrix d_recon =
      grads.recon.size() ? grads.recon : Matrix::Zero(n, static_cast<Eigen::Index>(spec_.input_dim));
  if (grads.p_enc.size() || grads.p_dec.size()) {
    require(spec_.with_heads, ErrorKind::State, "model backward: head gradients given to a model without heads");
  }
  if (grads.p_enc.size()) d_enc += head_enc_.backward(grads.p_enc);
  if (grads.p_dec.size()) d_recon += head_dec_.backward(grads.p_dec);
  d_enc += decoder_.backward(d_recon);
  encoder_.backward(d_enc);
}

std::vector<ParamRef> AutoencoderModel::params() {
  std::vector<ParamRef> out;
  for (Sequential* s : {&encoder_, &decoder_, &head_enc_, &head_dec_}) {
    auto p = s->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void AutoencoderModel::zero_grad() {
  encoder_.zero_grad();
  decoder_.zero_grad();
  head_enc_.zero_grad();
  head_dec_.zero_grad();
}

std::size_t AutoencoderModel::param_count() const {
  return encoder_.param_count() + decoder_.param_count() + head_enc_.param_count() + head_dec_.param_count();
}

std::size_t count_parameters(const AutoencoderModel& model) { return model.param_count(); }

std::vector<Layer*> AutoencoderModel::all_layers() {
  std::vector<Layer*> out;
  for (Sequential* s : {&encoder_, &decoder_, &head_enc_, &head_dec_}) {
    for (std::size_t i = 0; i < s->size(); ++i) out.push_back(&s->at(i));
  }
  return out;
}

std::vector<const Layer*> AutoencoderModel::all_layers() const {
  std::vector<const Layer*> out;
  for (const Sequential* s : {&encoder_, &decoder_, &head_enc_, &head_dec_}) {
    for (std::size_t i = 0; i < s->size(); ++i) out.push_back(&s->at(i));
  }
  return out;
}

// ---------------------------------------------------------------- serialization

namespace {

constexpr char kMagic[8] = {'A', 'O', 'C', 'I', 'D', 'S', 'C', 'K'};

void write_spec(std::ostream& os, const ArchitectureSpec& s) {
  binio::write_u64(os, s.input_dim);
  binio::write_u64(os, s.hidden_dims.size());
  for (auto h : s.hidden_dims) binio::write_u64(os, h);
  binio::write_u64(os, s.with_heads ? 1 : 0);
  binio::write_u64(os, s.batch_norm ? 1 : 0);
  binio::write_f64(os, s.bn_epsilon);
  binio::write_f64(os, s.bn_momentum);
}

ArchitectureSpec read_spec(std::istream& is) {
  ArchitectureSpec s;
  s.input_dim = binio::read_u64(is);
  const auto n = binio::read_u64(is);
  require(n > 0 && n < 64, ErrorKind::Parse, "checkpoint: implausible hidden layer count");
  for (std::uint64_t i = 0; i < n; ++i) s.hidden_dims.push_back(binio::read_u64(is));
  s.with_heads = binio::read_u64(is) != 0;
  s.batch_norm = binio::read_u64(is) != 0;
  s.bn_epsilon = binio::read_f64(is);
  s.bn_momentum = binio::read_f64(is);
  s.validate();
  return s;
}

void write_view(std::ostream& os, const ViewDecision& v) {
  for (const ClassGaussian* g : {&v.normal, &v.attack}) {
    binio::write_f64(os, g->mean);
    binio::write_f64(os, g->stddev);
    binio::write_f64(os, g->prior);
  }
  binio::write_vector(os, v.reference);
}

ViewDecision read_view(std::istream& is) {
  ViewDecision v;
  for (ClassGaussian* g : {&v.normal, &v.attack}) {
    g->mean = binio::read_f64(is);
    g->stddev = binio::read_f64(is);
    g->prior = binio::read_f64(is);
  }
  v.reference = binio::read_vector(is);
  return v;
}

}  // namespace

void AutoencoderModel::write(std::ostream& os) const {
  write_spec(os, spec_);
  for (const Layer* layer : all_layers()) {
    for (const Matrix* value : layer->param_values()) binio::write_matrix(os, *value);
    layer->write_state(os);
  }
}

AutoencoderModel AutoencoderModel::read(std::istream& is) {
  AutoencoderModel m = build(read_spec(is), 0);
  for (Layer* layer : m.all_layers()) {
    for (auto& p : layer->params()) binio::read_matrix_into(is, *p.value);
    layer->read_state(is);
  }
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const AutoencoderModel& model, const Optimizer* optimizer,
                     const GaussianDecision* decision) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  binio::write_u64(out, kCheckpointVersion);
  model.write(out);
  binio::write_u64(out, optimizer ? 1 : 0);
  if (optimizer) optimizer->write(out);
  binio::write_u64(out, decision ? 1 : 0);
  if (decision) {
    write_view(out, decision->encoder);
    write_view(out, decision->decoder);
  }
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof magic);
  require(in.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0, ErrorKind::Parse,
          path.string() + ": not an aocids checkpoint");
  const auto version = binio::read_u64(in);
  require(version == kCheckpointVersion, ErrorKind::Parse,
          path.string() + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck{AutoencoderModel::read(in), std::nullopt, std::nullopt};
  if (binio::read_u64(in)) ck.optimizer = Optimizer::read(in);
  if (binio::read_u64(in)) {
    GaussianDecision d;
    d.encoder = read_view(in);
    d.decoder = read_view(in);
    ck.decision = std::move(d);
  }
  return ck;
}

// ---------------------------------------------------------------- gaussian decision

void fit_class_gaussians(const Vector& scores, const Vector& labels, ClassGaussian& normal, ClassGaussian& attack) {
  require(scores.size() == labels.size(), ErrorKind::Shape, "gaussian fit: score and label counts differ");
  double sum[2] = {0, 0}, count[2] = {0, 0};
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const int c = labels[i] >= 0.5 ? 1 : 0;
    sum[c] += scores[i];
    count[c] += 1;
  }
  require(count[0] > 0 && count[1] > 0, ErrorKind::InvalidArgument, "gaussian fit needs both classes present");
  const double mean[2] = {sum[0] / count[0], sum[1] / count[1]};
  double sq[2] = {0, 0};
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const int c = labels[i] >= 0.5 ? 1 : 0;
    sq[c] += (scores[i] - mean[c]) * (scores[i] - mean[c]);
  }
  const double total = count[0] + count[1];
  normal = {mean[0], std::max(std::sqrt(sq[0] / count[0]), kStddevFloor), count[0] / total};
  attack = {mean[1], std::max(std::sqrt(sq[1] / count[1]), kStddevFloor), count[1] / total};
}

Vector cosine_scores(const Matrix& reps, const Vector& reference) {
  require(reps.cols() == reference.size(), ErrorKind::Shape, "cosine scores: reference width mismatch");
  Vector out(reps.rows());
  const std::span<const double> ref(reference.data(), static_cast<std::size_t>(reference.size()));
  for (Eigen::Index i = 0; i < reps.rows(); ++i) {
    const Eigen::RowVectorXd row = reps.row(i);
    out[i] = cosine_similarity(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), ref);
  }
  return out;
}

ViewDecision fit_view_decision(const Matrix& reps, const Vector& labels) {
  require(reps.rows() == labels.size(), ErrorKind::Shape, "gaussian fit: label count does not match rows");
  Vector reference = Vector::Zero(reps.cols());
  double normals = 0;
  for (Eigen::Index i = 0; i < reps.rows(); ++i) {
    if (labels[i] < 0.5) {
      reference += reps.row(i).transpose();
      normals += 1;
    }
  }
  require(normals > 0 && normals < static_cast<double>(reps.rows()), ErrorKind::InvalidArgument,
          "gaussian fit needs both classes present");
  reference /= normals;
  ViewDecision vd;
  vd.reference = reference;
  fit_class_gaussians(cosine_scores(reps, reference), labels, vd.normal, vd.attack);
  return vd;
}

GaussianDecision fit_gaussian_decision(AutoencoderModel& model, const Matrix& x, const Vector& labels) {
  const ForwardOutputs out = model.forward(x, Mode::Inference);
  return {fit_view_decision(out.enc, labels), fit_view_decision(out.recon, labels)};
}

ViewVerdict gaussian_posterior_classify(const ViewDecision& vd, double score) {
  auto log_joint = [score](const ClassGaussian& g) {
    if (g.prior <= 0.0) return -std::numeric_limits<double>::infinity();
    const double z = (score - g.mean) / g.stddev;
    return std::log(g.prior) - std::log(g.stddev) - 0.5 * z * z;
  };
  const double ln = log_joint(vd.normal);
  const double la = log_joint(vd.attack);
  const double m = std::max(ln, la);
  ViewVerdict v;
  if (m == -std::numeric_limits<double>::infinity()) {
    v.posterior_normal = v.posterior_attack = 0.5;
  } else {
    const double en = std::exp(ln - m), ea = std::exp(la - m);
    v.posterior_normal = en / (en + ea);
    v.posterior_attack = ea / (en + ea);
  }
  v.label = ln > la ? 0 : 1;
  v.confidence = std::max(v.posterior_normal, v.posterior_attack);
  return v;
}

Verdict confidence_vote(const ViewVerdict& enc, const ViewVerdict& dec) {
  const ViewVerdict& winner = dec.confidence > enc.confidence ? dec : enc;
  return {winner.label, winner.confidence, enc, dec};
}

ViewVerdict head_verdict(double p) {
  ViewVerdict v;
  v.label = p >= 0.5 ? 1 : 0;
  v.posterior_attack = p;
  v.posterior_normal = 1.0 - p;
  v.confidence = std::max(p, 1.0 - p);
  return v;
}

std::vector<Verdict> predict(AutoencoderModel& model, const GaussianDecision* decision, DecisionMode mode,
                             const Matrix& x) {
  std::vector<Verdict> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  if (x.rows() == 0) return out;
  if (mode == DecisionMode::Heads) {
    require(model.has_heads(), ErrorKind::State, "predict: heads decision mode needs a model with heads");
    const ForwardOutputs f = model.forward(x, Mode::Inference);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out.push_back(confidence_vote(head_verdict(f.p_enc[i]), head_verdict(f.p_dec[i])));
    }
    return out;
  }
  require(decision != nullptr, ErrorKind::State, "predict: gaussian decision has not been fitted");
  const ForwardOutputs f = model.forward(x, Mode::Inference);
  const Vector enc_scores = cosine_scores(f.enc, decision->encoder.reference);
  const Vector dec_scores = cosine_scores(f.recon, decision->decoder.reference);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out.push_back(confidence_vote(gaussian_posterior_classify(decision->encoder, enc_scores[i]),
                                  gaussian_posterior_classify(decision->decoder, dec_scores[i])));
  }
  return out;
}

std::vector<int> verdict_labels(const std::vector<Verdict>& verdicts) {
  std::vector<int> out;
  out.reserve(verdicts.size());
  for (const auto& v : verdicts) out.push_back(v.label);
  return out;
}

}  // namespace aocids
