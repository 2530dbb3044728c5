#include "core/online.hpp"

#include "core/augment.hpp"
#include "core/error.hpp"
#include "core/losses.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace aocids {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ArchitectureSpec resolve_arch(ArchitectureSpec arch, std::size_t input_dim) {
  if (arch.input_dim == 0) arch.input_dim = input_dim;
  require(arch.input_dim == input_dim, ErrorKind::Shape,
          "architecture input_dim " + std::to_string(arch.input_dim) + " does not match data width " +
              std::to_string(input_dim));
  return arch;
}

bool has_both_classes(const Vector& y) {
  bool normal = false;
  bool attack = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) (y[i] >= 0.5 ? attack : normal) = true;
  return normal && attack;
}

struct RowRef {
  const LabeledPool* pool;
  Eigen::Index row;
};

}  // namespace

void LabeledPool::append(const Matrix& rows, const Vector& labels) {
  require(rows.rows() == labels.size(), ErrorKind::Shape, "pool append: row/label count mismatch");
  if (rows.rows() == 0) return;
  if (x.rows() == 0) {
    x = rows;
    y = labels;
    return;
  }
  require(rows.cols() == x.cols(), ErrorKind::Shape, "pool append: column count mismatch");
  const Eigen::Index old = x.rows();
  x.conservativeResize(old + rows.rows(), Eigen::NoChange);
  x.bottomRows(rows.rows()) = rows;
  y.conservativeResize(old + labels.size());
  y.tail(labels.size()) = labels;
}

Learner::Learner(const ExperimentConfig& cfg, std::size_t input_dim)
    : config(cfg),
      model(AutoencoderModel::build(resolve_arch(cfg.arch, input_dim), cfg.stream.seed)),
      optimizer(cfg.training.optimizer, cfg.training.learning_rate, cfg.training.weight_decay),
      rng(mix_seed(cfg.stream.seed, 1)) {
  config.arch = model.spec();
  config.validate();
}

std::vector<double> train_epochs(Learner& learner, const std::vector<const LabeledPool*>& pools, int epochs) {
  require(epochs >= 0, ErrorKind::InvalidArgument, "epoch count must be non-negative");
  const TrainingConfig& tc = learner.config.training;
  const StreamConfig& sc = learner.config.stream;

  std::vector<RowRef> rows;
  for (const LabeledPool* pool : pools) {
    for (Eigen::Index r = 0; r < pool->x.rows(); ++r) rows.push_back({pool, r});
  }
  require(!rows.empty(), ErrorKind::InvalidArgument, "training pool is empty");
  const Eigen::Index dim = rows.front().pool->x.cols();

  Vector all_labels(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) all_labels[static_cast<Eigen::Index>(i)] = rows[i].pool->y[rows[i].row];
  require(has_both_classes(all_labels), ErrorKind::InvalidArgument, "training pool must contain both classes");

  std::vector<double> weights;
  if (sc.use_balanced_sampling) weights = balanced_sample_weights(all_labels);

  const LrSchedule schedule = tc.lr_schedule();
  const std::size_t batch = std::max<std::size_t>(tc.batch_size, 2);
  std::vector<double> epoch_losses;
  epoch_losses.reserve(static_cast<std::size_t>(epochs));

  std::vector<std::size_t> order(rows.size());
  for (int e = 0; e < epochs; ++e) {
    learner.optimizer.set_learning_rate(schedule.lr_at(learner.epochs_done));
    if (sc.use_balanced_sampling) {
      order = weighted_draws(weights, rows.size(), learner.rng);
    } else {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), learner.rng);
    }

    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start + 2 <= order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      if (count < 2) break;
      Matrix x(static_cast<Eigen::Index>(count), dim);
      Vector y(static_cast<Eigen::Index>(count));
      for (std::size_t i = 0; i < count; ++i) {
        const RowRef& ref = rows[order[start + i]];
        x.row(static_cast<Eigen::Index>(i)) = ref.pool->x.row(ref.row);
        y[static_cast<Eigen::Index>(i)] = ref.pool->y[ref.row];
      }
      if (sc.use_mixup) {
        MixupResult mixed = mixup_batch(x, y, MixupConfig{sc.mixup_alpha}, learner.rng());
        x = std::move(mixed.x);
        y = std::move(mixed.y);
      }

      ForwardOutputs out = learner.model.forward(x, Mode::Training);
      OutputGradients grads;
      double loss = 0.0;
      if (tc.objective == Objective::Improved) {
        ImprovedObjectiveResult r = improved_objective(out.p_enc, out.p_dec, out.recon, x, y, tc.improved);
        loss = r.loss;
        grads.p_enc = std::move(r.grad_p_enc);
        grads.p_dec = std::move(r.grad_p_dec);
        grads.recon = std::move(r.grad_recon);
      } else {
        // The contrastive objective needs hard class membership.
        Vector hard = (y.array() >= 0.5).cast<double>();
        CrcObjectiveResult r = crc_objective(out.enc, out.recon, hard, tc.crc);
        loss = r.loss;
        grads.enc = std::move(r.grad_enc);
        grads.recon = std::move(r.grad_dec);
      }
      learner.model.zero_grad();
      learner.model.backward(grads);
      const std::vector<ParamRef> params = learner.model.params();
      learner.optimizer.step(params);
      loss_sum += loss;
      ++steps;
    }
    epoch_losses.push_back(steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0);
    ++learner.epochs_done;
  }
  return epoch_losses;
}

void refit_decision(Learner& learner, const LabeledPool& clean) {
  if (learner.config.stream.decision_mode != DecisionMode::Gaussian) return;
  learner.decision = fit_gaussian_decision(learner.model, clean.x, clean.y);
}

void initial_train(Learner& learner, const LabeledPool& clean) {
  require(has_both_classes(clean.y), ErrorKind::InvalidArgument, "initial pool must contain both classes");
  train_epochs(learner, {&clean}, learner.config.stream.epoch0);
  refit_decision(learner, clean);
}

PseudoLabelBatch generate_pseudo_labels(Learner& learner, const Matrix& batch, std::uint64_t seed) {
  require(batch.rows() > 0, ErrorKind::InvalidArgument, "stream batch is empty");
  const StreamConfig& sc = learner.config.stream;
  const auto n = static_cast<std::size_t>(batch.rows());
  PseudoLabelBatch out;

  if (sc.gate_mode == GateMode::Base) {
    require(sc.decision_mode == DecisionMode::Heads || learner.decision.has_value(), ErrorKind::State,
            "gaussian decision has not been fitted");
    const GaussianDecision* decision = learner.decision ? &*learner.decision : nullptr;
    const std::vector<Verdict> verdicts = predict(learner.model, decision, sc.decision_mode, batch);
    out.predictions = verdict_labels(verdicts);
    out.logged_labels = random_label_flip(out.predictions, FlipConfig{sc.flip_fraction}, seed);
    out.accepted.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (out.logged_labels[i] != out.predictions[i]) ++out.flipped;
      out.accepted.push_back({i, out.logged_labels[i], verdicts[i].confidence});
    }
    out.acceptance_rate = 1.0;
    return out;
  }

  require(learner.model.has_heads(), ErrorKind::State, "filtered pseudo-labelling requires classifier heads");
  const ForwardOutputs fwd = learner.model.forward(batch, Mode::Inference);
  const double theta = sc.confidence_threshold;
  out.predictions.resize(n);
  out.logged_labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const ViewVerdict enc = head_verdict(fwd.p_enc[r]);
    const ViewVerdict dec = head_verdict(fwd.p_dec[r]);
    const Verdict vote = confidence_vote(enc, dec);
    out.predictions[i] = vote.label;
    const bool agree = enc.label == dec.label;
    const bool confident = sc.gate_requires_both_heads ? (enc.confidence >= theta && dec.confidence >= theta)
                                                       : vote.confidence >= theta;
    if (agree && confident) {
      out.accepted.push_back({i, vote.label, std::min(enc.confidence, dec.confidence)});
      out.logged_labels[i] = vote.label;
    } else {
      ++out.rejected_count;
    }
  }
  out.acceptance_rate = static_cast<double>(out.accepted.size()) / static_cast<double>(n);
  return out;
}

Evaluation evaluate(Learner& learner, const FeatureMatrix& test) {
  require(test.labels.has_value(), ErrorKind::InvalidArgument, "evaluation data has no labels");
  const StreamConfig& sc = learner.config.stream;
  require(sc.decision_mode == DecisionMode::Heads || learner.decision.has_value(), ErrorKind::State,
          "gaussian decision has not been fitted");
  const GaussianDecision* decision = learner.decision ? &*learner.decision : nullptr;
  const std::vector<int> pred = verdict_labels(predict(learner.model, decision, sc.decision_mode, test.data));
  std::vector<int> truth(pred.size());
  for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = (*test.labels)[static_cast<Eigen::Index>(i)] >= 0.5 ? 1 : 0;
  return compute_metrics(pred, truth);
}

BatchRecord stream_step(StreamState& state, Learner& learner, const Matrix& batch, const FeatureMatrix* test) {
  require(batch.rows() > 0, ErrorKind::InvalidArgument, "stream batch is empty");
  const std::size_t index = state.batch_cursor + 1;
  const PseudoLabelBatch pl = generate_pseudo_labels(learner, batch, mix_seed(learner.config.stream.seed, 1000 + index));

  Matrix accepted_x(static_cast<Eigen::Index>(pl.accepted.size()), batch.cols());
  Vector accepted_y(static_cast<Eigen::Index>(pl.accepted.size()));
  for (std::size_t i = 0; i < pl.accepted.size(); ++i) {
    accepted_x.row(static_cast<Eigen::Index>(i)) = batch.row(static_cast<Eigen::Index>(pl.accepted[i].row));
    accepted_y[static_cast<Eigen::Index>(i)] = pl.accepted[i].label;
  }
  state.pseudo.append(accepted_x, accepted_y);

  std::vector<const LabeledPool*> pools{&state.clean};
  if (state.pseudo.rows() > 0) pools.push_back(&state.pseudo);
  const std::vector<double> losses = train_epochs(learner, pools, learner.config.stream.epoch1);
  refit_decision(learner, state.clean);

  BatchRecord rec;
  rec.batch = index;
  rec.batch_size = static_cast<std::size_t>(batch.rows());
  rec.accepted = pl.accepted.size();
  rec.rejected = pl.rejected_count;
  rec.acceptance_rate = pl.acceptance_rate;
  rec.flipped = pl.flipped;
  rec.clean_pool = state.clean.rows();
  rec.pseudo_pool = state.pseudo.rows();
  rec.learning_rate = learner.optimizer.learning_rate();
  rec.train_loss = losses.empty() ? 0.0 : losses.back();
  if (test != nullptr) rec.test = evaluate(learner, *test);

  state.batch_cursor = index;
  state.history.push_back(rec);
  return rec;
}

namespace {

struct InitialSplit {
  LabeledPool clean;
  std::vector<std::size_t> stream_rows;
};

InitialSplit split_initial(const FeatureMatrix& train, const ExperimentConfig& cfg) {
  require(train.labels.has_value(), ErrorKind::InvalidArgument, "training data has no labels");
  const double frac = cfg.stream.initial_fraction;
  require(frac > 0.0 && frac < 1.0, ErrorKind::InvalidArgument, "initial_fraction must lie in (0, 1)");
  const std::size_t n = train.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(cfg.stream.seed, 2));
  std::shuffle(order.begin(), order.end(), rng);

  const auto n0 = static_cast<std::size_t>(std::floor(frac * static_cast<double>(n)));
  require(n0 >= 2, ErrorKind::InvalidArgument, "initial split holds fewer than two samples");
  InitialSplit split;
  split.clean.x.resize(static_cast<Eigen::Index>(n0), static_cast<Eigen::Index>(train.cols()));
  split.clean.y.resize(static_cast<Eigen::Index>(n0));
  for (std::size_t i = 0; i < n0; ++i) {
    split.clean.x.row(static_cast<Eigen::Index>(i)) = train.data.row(static_cast<Eigen::Index>(order[i]));
    split.clean.y[static_cast<Eigen::Index>(i)] = (*train.labels)[static_cast<Eigen::Index>(order[i])];
  }
  split.stream_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n0), order.end());
  return split;
}

}  // namespace

Learner train_initial_only(const FeatureMatrix& train, const ExperimentConfig& cfg, LabeledPool* clean_out) {
  InitialSplit split = split_initial(train, cfg);
  Learner learner(cfg, train.cols());
  initial_train(learner, split.clean);
  if (clean_out != nullptr) *clean_out = std::move(split.clean);
  return learner;
}

StreamResult run_stream(const FeatureMatrix& train, const FeatureMatrix& test, const ExperimentConfig& cfg,
                        std::size_t max_batches, const ProgressFn& progress) {
  cfg.validate();
  require(test.cols() == train.cols(), ErrorKind::Shape, "train and test feature widths differ");
  require(cfg.stream.stream_batch_size > 0, ErrorKind::InvalidArgument, "stream_batch_size must be positive");
  InitialSplit split = split_initial(train, cfg);
  Learner learner(cfg, train.cols());

  StreamResult result;
  result.name = cfg.name;
  result.seed = cfg.stream.seed;
  result.param_count = learner.model.param_count();
  result.initial_size = split.clean.rows();
  result.stream_size = split.stream_rows.size();

  initial_train(learner, split.clean);
  result.initial = evaluate(learner, test);

  StreamState state;
  state.clean = std::move(split.clean);
  const std::size_t bs = cfg.stream.stream_batch_size;
  const std::size_t total = split.stream_rows.size();
  for (std::size_t start = 0; start < total; start += bs) {
    if (max_batches != 0 && state.batch_cursor >= max_batches) break;
    const std::size_t count = std::min(bs, total - start);
    Matrix batch(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(train.cols()));
    for (std::size_t i = 0; i < count; ++i) {
      batch.row(static_cast<Eigen::Index>(i)) = train.data.row(static_cast<Eigen::Index>(split.stream_rows[start + i]));
    }
    const BatchRecord rec = stream_step(state, learner, batch, &test);
    if (progress) progress(rec);
  }
  result.history = std::move(state.history);
  result.final = result.history.empty() ? result.initial : *result.history.back().test;
  return result;
}

std::string history_to_jsonl(const std::vector<BatchRecord>& history) {
  std::ostringstream os;
  for (const BatchRecord& r : history) {
    nlohmann::ordered_json j;
    j["batch"] = r.batch;
    j["batch_size"] = r.batch_size;
    j["accepted"] = r.accepted;
    j["rejected"] = r.rejected;
    j["acceptance_rate"] = r.acceptance_rate;
    j["flipped"] = r.flipped;
    j["clean_pool"] = r.clean_pool;
    j["pseudo_pool"] = r.pseudo_pool;
    j["learning_rate"] = r.learning_rate;
    j["train_loss"] = r.train_loss;
    if (r.test) {
      const MetricSet& m = r.test->metrics;
      j["accuracy"] = m.accuracy;
      j["precision"] = m.precision;
      j["recall"] = m.recall;
      j["f1"] = m.f1;
      j["tp"] = r.test->confusion.tp;
      j["tn"] = r.test->confusion.tn;
      j["fp"] = r.test->confusion.fp;
      j["fn"] = r.test->confusion.fn;
    }
    os << j.dump() << '\n';
  }
  return os.str();
}

}  // namespace aocids
