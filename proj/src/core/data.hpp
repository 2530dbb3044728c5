#pragma once

#include "core/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aocids {

enum class ColumnKind {
  Numeric,
  Categorical,
  Label,
  Stratum,  // kept as text for stratification, never a model feature
  Ignored,
};

struct ColumnSpec {
  std::string name;
  ColumnKind kind;
};

struct Schema {
  std::vector<ColumnSpec> columns;
  std::string label_column = "label";

  /// Official UNSW-NB15 training/testing set layout (45 columns).
  static Schema unsw_nb15();
  /// Every header column numeric except `label_column`.
  static Schema all_numeric(const std::vector<std::string>& header, const std::string& label_column = "label");
};

struct RawColumn {
  std::string name;
  ColumnKind kind;
  std::vector<double> numbers;    // Numeric columns
  std::vector<std::string> text;  // Categorical / Stratum columns
};

struct RawDataset {
  std::vector<RawColumn> columns;
  std::vector<int> labels;  // 0 = normal, 1 = attack
  std::string label_column = "label";

  std::size_t n_rows() const { return labels.size(); }
  const RawColumn* find(const std::string& name) const;
  RawColumn* find(const std::string& name);
};

/// Reads the header row of a CSV file.
std::vector<std::string> read_csv_header(const std::filesystem::path& path);

/// Loads a CSV whose header names exactly the schema's columns (any order).
RawDataset load_dataset(const std::filesystem::path& path, const Schema& schema);

/// Maps label text to {0, 1}: 0/normal/benign and 1/attack/anomaly/malicious.
int parse_label(const std::string& text);

struct FeatureMatrix {
  Matrix data;
  std::optional<Vector> labels;

  std::size_t rows() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(data.cols()); }
};

struct NumericRange {
  std::string column;
  double min = 0.0;
  double max = 0.0;
};

struct CategoricalVocab {
  std::string column;
  std::vector<std::string> values;  // sorted
};

/// Min-max scaling of numeric columns and one-hot encoding of categorical columns,
/// fitted on training data only. Columns constant on the training data are dropped.
class Preprocessor {
 public:
  static Preprocessor fit(const RawDataset& train);

  FeatureMatrix apply(const RawDataset& ds) const;

  std::size_t output_dim() const { return output_dim_; }
  const std::vector<std::string>& dropped_columns() const { return dropped_; }
  const std::vector<NumericRange>& numeric_ranges() const { return numeric_; }
  const std::vector<CategoricalVocab>& categorical_vocab() const { return categorical_; }
  /// Output column names, in feature order.
  std::vector<std::string> feature_names() const;

  std::string to_json() const;
  static Preprocessor from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static Preprocessor load(const std::filesystem::path& path);

  static constexpr int kFormatVersion = 1;

 private:
  std::vector<std::string> dropped_;
  std::vector<NumericRange> numeric_;
  std::vector<CategoricalVocab> categorical_;
  std::size_t output_dim_ = 0;
};

struct EngineeredFeatures {
  double total_load = 0.0;
  double rate_ratio = 0.0;
  double pkt_diff = 0.0;
};

inline constexpr double kDurationEpsilon = 0.001;

EngineeredFeatures engineer_features(double sload, double dload, double sbytes, double dur, std::int64_t spkts,
                                     std::int64_t dpkts);

/// Appends total_load, rate_ratio and pkt_diff as numeric columns.
void append_engineered_features(RawDataset& ds);

struct SplitIndices {
  std::vector<std::size_t> first;   // ascending
  std::vector<std::size_t> second;  // ascending
  std::vector<std::string> warnings;
};

/// Per-stratum shuffle; round(fraction * stratum size) rows go to `first`.
/// Strata with fewer than two rows go wholly to the larger half and are reported.
SplitIndices stratified_split(const std::vector<std::string>& strata, double fraction, std::uint64_t seed);

FeatureMatrix take_rows(const FeatureMatrix& fm, const std::vector<std::size_t>& rows);

std::pair<FeatureMatrix, FeatureMatrix> stratified_split(const FeatureMatrix& fm,
                                                         const std::vector<std::string>& strata,
                                                         double fraction, std::uint64_t seed);

/// Inverse class frequency per sample; each class carries equal total weight.
std::vector<double> balanced_sample_weights(const Vector& labels);

/// Draws `count` indices with replacement proportionally to `weights`.
std::vector<std::size_t> weighted_draws(const std::vector<double>& weights, std::size_t count,
                                        std::mt19937_64& rng);

/// Normal rows ~ N(0, I); attack rows ~ N(mu, I) with |mu| = separation along the
/// all-ones diagonal. Rows are shuffled; deterministic given seed.
FeatureMatrix generate_synthetic(std::size_t n_normal, std::size_t n_attack, std::size_t dim, double separation,
                                 std::uint64_t seed);

/// Writes a labelled matrix as CSV with header f0..f{d-1},label.
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& fm,
                       const std::vector<std::string>& names = {});

}  // namespace aocids
