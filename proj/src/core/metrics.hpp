#pragma once

#include <cstdint>
#include <span>

namespace aocids {

/// Attack is the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
};

/// Percentages in [0, 100]. Undefined ratios are reported as 0 and flagged.
struct MetricSet {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct Evaluation {
  ConfusionMatrix confusion;
  MetricSet metrics;
};

Evaluation compute_metrics(std::span<const int> predictions, std::span<const int> truth);
MetricSet metrics_from_confusion(const ConfusionMatrix& cm);

}  // namespace aocids
