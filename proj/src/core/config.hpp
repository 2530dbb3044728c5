#pragma once

#include "core/adm.hpp"
#include "core/losses.hpp"
#include "core/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace aocids {

enum class Objective {
  Crc,       // encoder + decoder contrastive loss
  Improved,  // head BCE + reconstruction MSE
};

enum class GateMode {
  Base,      // accept every prediction, then flip a fixed fraction
  Filtered,  // confidence + encoder/decoder agreement gate
};

struct TrainingConfig {
  Objective objective = Objective::Crc;
  CrcConfig crc;
  ImprovedLossConfig improved;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  ScheduleKind schedule = ScheduleKind::Constant;
  double eta_min = 1e-5;
  int t_max = 50;
  std::size_t batch_size = 128;

  LrSchedule lr_schedule() const { return {schedule, learning_rate, eta_min, t_max}; }
};

struct StreamConfig {
  double initial_fraction = 0.2;
  std::size_t stream_batch_size = 2784;
  int epoch0 = 300;
  int epoch1 = 3;
  GateMode gate_mode = GateMode::Base;
  double confidence_threshold = 0.85;
  // false: only the voted (more confident) head has to clear the threshold
  bool gate_requires_both_heads = true;
  double flip_fraction = 0.05;
  bool use_mixup = false;
  double mixup_alpha = 0.2;
  bool use_balanced_sampling = false;
  DecisionMode decision_mode = DecisionMode::Gaussian;
  std::uint64_t seed = 0;
};

/// Everything that selects between the base system and the improved components.
/// arch.input_dim == 0 means "take it from the data".
struct ExperimentConfig {
  std::string name = "base";
  ArchitectureSpec arch;
  TrainingConfig training;
  StreamConfig stream;

  void validate() const;

  /// Base replication: [128, 64] autoencoder, contrastive loss, Gaussian decision,
  /// 5% random flip, SGD lr 1e-3, batch 128, 300 initial epochs.
  static ExperimentConfig base_replication();
  /// Improved training stack (heads, BCE + MSE, Adam + cosine annealing, batch 256,
  /// 50 initial epochs, balanced sampling) with the three toggles.
  static ExperimentConfig improved(bool pseudo_filter, bool mixup, bool lite);
};

/// Named configurations: base, imp2, imp3, imp4, imp23, imp24, imp234.
ExperimentConfig preset_config(const std::string& name);

std::string config_to_json(const ExperimentConfig& cfg);
/// Keys not present keep the values of `defaults` (or of the named "preset", when the
/// document has one); unknown keys are rejected.
ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& defaults);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

const char* to_string(GateMode m);
const char* to_string(DecisionMode m);
const char* to_string(Objective o);

}  // namespace aocids
