#include "core/metrics.hpp"

#include "core/error.hpp"

namespace aocids {

MetricSet metrics_from_confusion(const ConfusionMatrix& cm) {
  require(cm.total() > 0, ErrorKind::InvalidArgument, "metrics: no samples");
  MetricSet m;
  const auto tp = static_cast<double>(cm.tp);
  m.accuracy = 100.0 * static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = 100.0 * tp / static_cast<double>(cm.tp + cm.fp);
  }
  if (cm.tp + cm.fn == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = 100.0 * tp / static_cast<double>(cm.tp + cm.fn);
  }
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

Evaluation compute_metrics(std::span<const int> predictions, std::span<const int> truth) {
  require(predictions.size() == truth.size(), ErrorKind::Shape, "metrics: prediction and truth lengths differ");
  require(!predictions.empty(), ErrorKind::InvalidArgument, "metrics: empty input");
  Evaluation e;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++e.confusion.tp;
    else if (!p && !t) ++e.confusion.tn;
    else if (p) ++e.confusion.fp;
    else ++e.confusion.fn;
  }
  e.metrics = metrics_from_confusion(e.confusion);
  return e;
}

}  // namespace aocids
