#pragma once

#include "core/config.hpp"
#include "core/data.hpp"
#include "core/online.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace aocids {

/// A quoted result row. Missing metrics are std::nullopt.
struct ReferenceRow {
  const char* method;
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<std::size_t> params;
};

/// Published comparison rows, quoted verbatim and never recomputed.
const std::vector<ReferenceRow>& quoted_baselines();
/// Published base system, the published replication of it, and the XGBoost-BalSamp booster.
const ReferenceRow& quoted_published_base();
const ReferenceRow& quoted_replication();
const ReferenceRow& quoted_boost();
/// Published figures for an ablation run name (base, imp2, ..., imp234).
std::optional<ReferenceRow> reference_for_run(const std::string& run);

struct AblationPlan {
  std::vector<ExperimentConfig> runs;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t max_batches = 0;  // 0 = full stream

  void validate() const;

  /// base, imp2, imp3, imp4, imp23, imp24, imp234.
  static AblationPlan standard();
};

struct CellResult {
  std::string run;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  StreamResult result;
};

struct AblationResults {
  std::vector<std::string> runs;
  std::vector<std::uint64_t> seeds;
  std::vector<CellResult> cells;  // run-major, seeds in plan order
};

using CellProgressFn = std::function<void(const CellResult&)>;

/// Executes every (run, seed) cell. A failing cell is recorded and the rest continue.
/// Cells run on up to `threads` workers; the output order does not depend on it.
AblationResults run_ablation(const AblationPlan& plan, const FeatureMatrix& train, const FeatureMatrix& test,
                             unsigned threads = 1, const CellProgressFn& progress = {});

struct RunSummary {
  std::string run;
  std::size_t param_count = 0;
  std::size_t seeds_ok = 0;
  std::size_t seeds_failed = 0;
  std::optional<std::uint64_t> best_seed;
  Evaluation best;
  double mean_accuracy = 0.0;
  double mean_f1 = 0.0;
};

/// Index of the best cell: highest final accuracy, then F1, then the earliest entry.
std::optional<std::size_t> select_best(const std::vector<const CellResult*>& cells);

std::vector<RunSummary> summarize(const AblationResults& results);

std::string results_to_json(const AblationResults& results);
/// Metrics are recomputed from the stored confusion counts.
AblationResults results_from_json(const std::string& text);
void save_results(const std::filesystem::path& path, const AblationResults& results);
AblationResults load_results(const std::filesystem::path& path);

std::string render_table(const AblationResults& results);
std::string render_report_json(const AblationResults& results);
/// One row per stream batch of each run's best seed.
std::string render_plotdata(const AblationResults& results);

enum class ReportFormat { Table, Plotdata, All };

/// Writes report.txt / report.json (table) and plotdata.csv (plotdata) into `out_dir`.
std::vector<std::filesystem::path> emit_report(const AblationResults& results, const std::filesystem::path& out_dir,
                                               ReportFormat format = ReportFormat::All);

struct BoostExportSummary {
  std::size_t train_rows = 0;
  std::size_t valid_rows = 0;
  std::size_t test_rows = 0;
  std::size_t feature_count = 0;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> files;
};

/// Data export for an external gradient-boosted-tree learner: engineered features, a
/// preprocessing fit on the training file, an 80/20 split stratified on `stratum_column`
/// (label when absent), and balanced per-sample weights for the training part.
BoostExportSummary export_boost_data(const std::filesystem::path& train_csv, const std::filesystem::path& test_csv,
                                     const std::filesystem::path& out_dir, std::uint64_t seed,
                                     double valid_fraction = 0.2, const std::string& stratum_column = "attack_cat");

/// Loads a train/test CSV pair, fits the preprocessor on train and applies it to both.
/// Uses the UNSW-NB15 schema when the header matches it, otherwise every non-label column is numeric.
struct LoadedData {
  Preprocessor preprocessor;
  FeatureMatrix train;
  FeatureMatrix test;
};
LoadedData load_train_test(const std::filesystem::path& train_csv, const std::filesystem::path& test_csv);

}  // namespace aocids
