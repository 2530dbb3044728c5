#pragma once

#include "core/adm.hpp"
#include "core/config.hpp"
#include "core/data.hpp"
#include "core/metrics.hpp"

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace aocids {

struct LabeledPool {
  Matrix x;
  Vector y;

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
  void append(const Matrix& rows, const Vector& labels);
};

/// Model, optimizer, decision state and RNG for one experiment.
struct Learner {
  Learner(const ExperimentConfig& cfg, std::size_t input_dim);

  ExperimentConfig config;
  AutoencoderModel model;
  Optimizer optimizer;
  std::optional<GaussianDecision> decision;
  int epochs_done = 0;  // drives the per-epoch schedule
  std::mt19937_64 rng;
};

/// Runs `epochs` epochs of the configured objective over the concatenation of `pools`.
/// Returns the mean minibatch loss of each epoch.
std::vector<double> train_epochs(Learner& learner, const std::vector<const LabeledPool*>& pools, int epochs);

/// epoch0 epochs on the clean pool, then the Gaussian fit (gaussian decision mode).
void initial_train(Learner& learner, const LabeledPool& clean);

/// Refits the Gaussian decision on `clean` (gaussian decision mode only).
void refit_decision(Learner& learner, const LabeledPool& clean);

struct PseudoLabel {
  std::size_t row = 0;
  int label = 0;
  double confidence = 0.0;
};

struct PseudoLabelBatch {
  std::vector<PseudoLabel> accepted;
  std::size_t rejected_count = 0;
  double acceptance_rate = 0.0;
  std::vector<int> predictions;  // model labels before flipping / gating
  std::vector<int> logged_labels;  // what the batch log records (rejected rows default to 0)
  std::size_t flipped = 0;
};

PseudoLabelBatch generate_pseudo_labels(Learner& learner, const Matrix& batch, std::uint64_t seed);

struct BatchRecord {
  std::size_t batch = 0;  // 1-based
  std::size_t batch_size = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double acceptance_rate = 0.0;
  std::size_t flipped = 0;
  std::size_t clean_pool = 0;
  std::size_t pseudo_pool = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  std::optional<Evaluation> test;
};

struct StreamState {
  LabeledPool clean;   // never modified after construction
  LabeledPool pseudo;  // accepted pseudo-labelled rows, labels frozen at acceptance
  std::size_t batch_cursor = 0;
  std::vector<BatchRecord> history;
};

/// Pseudo-label, grow the pool, fine-tune epoch1 epochs on clean + pseudo, refit the
/// decision from the clean pool, evaluate on `test` when given.
BatchRecord stream_step(StreamState& state, Learner& learner, const Matrix& batch, const FeatureMatrix* test);

Evaluation evaluate(Learner& learner, const FeatureMatrix& test);

struct StreamResult {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t param_count = 0;
  std::size_t initial_size = 0;
  std::size_t stream_size = 0;
  Evaluation initial;
  std::vector<BatchRecord> history;
  Evaluation final;
};

using ProgressFn = std::function<void(const BatchRecord&)>;

/// Shuffles `train` by seed, trains on the first initial_fraction, then streams the rest in
/// batches of stream_batch_size (the last one may be partial). `max_batches` = 0 streams all.
StreamResult run_stream(const FeatureMatrix& train, const FeatureMatrix& test, const ExperimentConfig& cfg,
                        std::size_t max_batches = 0, const ProgressFn& progress = {});

/// Trains on the initial split only and returns the learner (the `train` command).
Learner train_initial_only(const FeatureMatrix& train, const ExperimentConfig& cfg, LabeledPool* clean_out = nullptr);

/// One JSON object per line, one line per stream batch.
std::string history_to_jsonl(const std::vector<BatchRecord>& history);

}  // namespace aocids
