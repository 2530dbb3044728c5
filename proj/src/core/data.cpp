#include "core/data.hpp"

#include "core/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace aocids {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

// Comma-separated fields; double quotes delimit fields containing commas.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(trim(field));
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

// ---------------------------------------------------------------- schema

Schema Schema::unsw_nb15() {
  Schema s;
  s.label_column = "label";
  s.columns.push_back({"id", ColumnKind::Ignored});
  s.columns.push_back({"dur", ColumnKind::Numeric});
  for (const char* c : {"proto", "service", "state"}) s.columns.push_back({c, ColumnKind::Categorical});
  for (const char* c :
       {"spkts",          "dpkts",           "sbytes",           "dbytes",           "rate",
        "sttl",           "dttl",            "sload",            "dload",            "sloss",
        "dloss",          "sinpkt",          "dinpkt",           "sjit",             "djit",
        "swin",           "stcpb",           "dtcpb",            "dwin",             "tcprtt",
        "synack",         "ackdat",          "smean",            "dmean",            "trans_depth",
        "response_body_len", "ct_srv_src",   "ct_state_ttl",     "ct_dst_ltm",       "ct_src_dport_ltm",
        "ct_dst_sport_ltm", "ct_dst_src_ltm", "is_ftp_login",    "ct_ftp_cmd",       "ct_flw_http_mthd",
        "ct_src_ltm",     "ct_srv_dst",      "is_sm_ips_ports"}) {
    s.columns.push_back({c, ColumnKind::Numeric});
  }
  s.columns.push_back({"attack_cat", ColumnKind::Stratum});
  s.columns.push_back({"label", ColumnKind::Label});
  return s;
}

Schema Schema::all_numeric(const std::vector<std::string>& header, const std::string& label_column) {
  Schema s;
  s.label_column = label_column;
  for (const auto& name : header) {
    s.columns.push_back({name, name == label_column ? ColumnKind::Label : ColumnKind::Numeric});
  }
  return s;
}

// ---------------------------------------------------------------- loading

const RawColumn* RawDataset::find(const std::string& name) const {
  for (const auto& c : columns) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

RawColumn* RawDataset::find(const std::string& name) {
  for (auto& c : columns) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

int parse_label(const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "0" || t == "normal" || t == "benign") return 0;
  if (t == "1" || t == "attack" || t == "anomaly" || t == "malicious") return 1;
  double v = 0.0;
  if (parse_double(t, v) && (v == 0.0 || v == 1.0)) return static_cast<int>(v);
  fail(ErrorKind::Parse, "unrecognised label value '" + text + "'");
}

std::vector<std::string> read_csv_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse, path.string() + ": missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  return split_csv_line(line);
}

RawDataset load_dataset(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse, path.string() + ": missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  const std::vector<std::string> header = split_csv_line(line);

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    require(position.emplace(header[i], i).second, ErrorKind::Parse,
            path.string() + ": duplicate column '" + header[i] + "'");
  }
  std::set<std::string> expected;
  for (const auto& c : schema.columns) {
    expected.insert(c.name);
    require(position.count(c.name) > 0, ErrorKind::Parse, path.string() + ": missing column '" + c.name + "'");
  }
  for (const auto& h : header) {
    require(expected.count(h) > 0, ErrorKind::Parse, path.string() + ": unexpected column '" + h + "'");
  }
  require(position.count(schema.label_column) > 0, ErrorKind::Parse,
          path.string() + ": missing label column '" + schema.label_column + "'");

  RawDataset ds;
  ds.label_column = schema.label_column;
  std::vector<std::size_t> col_pos;
  for (const auto& c : schema.columns) {
    if (c.kind == ColumnKind::Label || c.kind == ColumnKind::Ignored) continue;
    ds.columns.push_back({c.name, c.kind, {}, {}});
    col_pos.push_back(position.at(c.name));
  }
  const std::size_t label_pos = position.at(schema.label_column);

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_csv_line(line);
    require(fields.size() == header.size(), ErrorKind::Parse,
            path.string() + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                " fields, expected " + std::to_string(header.size()));
    for (std::size_t c = 0; c < ds.columns.size(); ++c) {
      RawColumn& col = ds.columns[c];
      const std::string& cell = fields[col_pos[c]];
      if (col.kind == ColumnKind::Numeric) {
        double v = 0.0;
        require(parse_double(cell, v), ErrorKind::Parse,
                path.string() + ": row " + std::to_string(row) + ", column '" + col.name +
                    "': cannot parse '" + cell + "' as a number");
        col.numbers.push_back(v);
      } else {
        col.text.push_back(cell);
      }
    }
    try {
      ds.labels.push_back(parse_label(fields[label_pos]));
    } catch (const Error& e) {
      fail(ErrorKind::Parse, path.string() + ": row " + std::to_string(row) + ": " + e.what());
    }
  }
  return ds;
}

// ---------------------------------------------------------------- preprocessing

Preprocessor Preprocessor::fit(const RawDataset& train) {
  require(train.n_rows() > 0, ErrorKind::InvalidArgument, "preprocessor: training data is empty");
  Preprocessor p;
  for (const auto& col : train.columns) {
    if (col.kind == ColumnKind::Numeric) {
      const auto [lo, hi] = std::minmax_element(col.numbers.begin(), col.numbers.end());
      require(std::isfinite(*lo) && std::isfinite(*hi), ErrorKind::InvalidArgument,
              "preprocessor: column '" + col.name + "' contains non-finite values");
      if (*lo == *hi) {
        p.dropped_.push_back(col.name);
        continue;
      }
      p.numeric_.push_back({col.name, *lo, *hi});
    } else if (col.kind == ColumnKind::Categorical) {
      std::set<std::string> values(col.text.begin(), col.text.end());
      if (values.size() < 2) {
        p.dropped_.push_back(col.name);
        continue;
      }
      p.categorical_.push_back({col.name, {values.begin(), values.end()}});
    }
  }
  p.output_dim_ = p.numeric_.size();
  for (const auto& v : p.categorical_) p.output_dim_ += v.values.size();
  require(p.output_dim_ > 0, ErrorKind::InvalidArgument, "preprocessor: no usable columns after dropping constants");
  return p;
}

FeatureMatrix Preprocessor::apply(const RawDataset& ds) const {
  require(output_dim_ > 0, ErrorKind::State, "preprocessor has not been fitted");
  const auto n = static_cast<Eigen::Index>(ds.n_rows());
  FeatureMatrix out;
  out.data = Matrix::Zero(n, static_cast<Eigen::Index>(output_dim_));
  Eigen::Index col_out = 0;
  for (const auto& range : numeric_) {
    const RawColumn* col = ds.find(range.column);
    require(col != nullptr && col->kind == ColumnKind::Numeric, ErrorKind::InvalidArgument,
            "preprocessor: input lacks numeric column '" + range.column + "'");
    const double span = range.max - range.min;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double v = col->numbers[static_cast<std::size_t>(r)];
      require(std::isfinite(v), ErrorKind::InvalidArgument,
              "preprocessor: non-finite value in column '" + range.column + "' at row " + std::to_string(r + 1));
      out.data(r, col_out) = span > 0.0 ? (v - range.min) / span : 0.0;
    }
    ++col_out;
  }
  for (const auto& vocab : categorical_) {
    const RawColumn* col = ds.find(vocab.column);
    require(col != nullptr && col->kind == ColumnKind::Categorical, ErrorKind::InvalidArgument,
            "preprocessor: input lacks categorical column '" + vocab.column + "'");
    for (Eigen::Index r = 0; r < n; ++r) {
      const std::string& v = col->text[static_cast<std::size_t>(r)];
      auto it = std::lower_bound(vocab.values.begin(), vocab.values.end(), v);
      if (it != vocab.values.end() && *it == v) {
        out.data(r, col_out + (it - vocab.values.begin())) = 1.0;
      }
    }
    col_out += static_cast<Eigen::Index>(vocab.values.size());
  }
  Vector labels(n);
  for (Eigen::Index r = 0; r < n; ++r) labels[r] = ds.labels[static_cast<std::size_t>(r)];
  out.labels = std::move(labels);
  return out;
}

std::vector<std::string> Preprocessor::feature_names() const {
  std::vector<std::string> names;
  for (const auto& r : numeric_) names.push_back(r.column);
  for (const auto& v : categorical_) {
    for (const auto& value : v.values) names.push_back(v.column + "=" + value);
  }
  return names;
}

std::string Preprocessor::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "aocids-preprocessor";
  j["version"] = kFormatVersion;
  j["dropped_columns"] = dropped_;
  j["numeric"] = nlohmann::ordered_json::array();
  for (const auto& r : numeric_) {
    nlohmann::ordered_json e;
    e["column"] = r.column;
    e["min"] = r.min;
    e["max"] = r.max;
    j["numeric"].push_back(e);
  }
  j["categorical"] = nlohmann::ordered_json::array();
  for (const auto& v : categorical_) {
    nlohmann::ordered_json e;
    e["column"] = v.column;
    e["values"] = v.values;
    j["categorical"].push_back(e);
  }
  j["output_dim"] = output_dim_;
  return j.dump(2) + "\n";
}

Preprocessor Preprocessor::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("preprocessor file: ") + e.what());
  }
  try {
    require(j.at("format").get<std::string>() == "aocids-preprocessor", ErrorKind::Parse,
            "preprocessor file: wrong format tag");
    require(j.at("version").get<int>() == kFormatVersion, ErrorKind::Parse,
            "preprocessor file: unsupported version");
    Preprocessor p;
    p.dropped_ = j.at("dropped_columns").get<std::vector<std::string>>();
    for (const auto& e : j.at("numeric")) {
      NumericRange r{e.at("column").get<std::string>(), e.at("min").get<double>(), e.at("max").get<double>()};
      require(r.min <= r.max, ErrorKind::Parse, "preprocessor file: min exceeds max for " + r.column);
      p.numeric_.push_back(r);
    }
    for (const auto& e : j.at("categorical")) {
      CategoricalVocab v{e.at("column").get<std::string>(), e.at("values").get<std::vector<std::string>>()};
      require(std::is_sorted(v.values.begin(), v.values.end()), ErrorKind::Parse,
              "preprocessor file: vocabulary for " + v.column + " is not sorted");
      p.categorical_.push_back(std::move(v));
    }
    p.output_dim_ = j.at("output_dim").get<std::size_t>();
    std::size_t expected = p.numeric_.size();
    for (const auto& v : p.categorical_) expected += v.values.size();
    require(expected == p.output_dim_ && expected > 0, ErrorKind::Parse,
            "preprocessor file: output_dim does not match its columns");
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("preprocessor file: ") + e.what());
  }
}

void Preprocessor::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << to_json();
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

Preprocessor Preprocessor::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

// ---------------------------------------------------------------- engineered features

EngineeredFeatures engineer_features(double sload, double dload, double sbytes, double dur, std::int64_t spkts,
                                     std::int64_t dpkts) {
  require(dur >= 0.0, ErrorKind::InvalidArgument, "engineer_features: negative duration");
  require(spkts >= 0 && dpkts >= 0, ErrorKind::InvalidArgument, "engineer_features: negative packet count");
  return {sload + dload, sbytes / (dur + kDurationEpsilon), static_cast<double>(spkts - dpkts)};
}

void append_engineered_features(RawDataset& ds) {
  auto column = [&](const char* name) -> const std::vector<double>& {
    const RawColumn* c = ds.find(name);
    require(c != nullptr && c->kind == ColumnKind::Numeric, ErrorKind::InvalidArgument,
            std::string("feature engineering needs numeric column '") + name + "'");
    return c->numbers;
  };
  const auto& sload = column("sload");
  const auto& dload = column("dload");
  const auto& sbytes = column("sbytes");
  const auto& dur = column("dur");
  const auto& spkts = column("spkts");
  const auto& dpkts = column("dpkts");
  RawColumn total{"total_load", ColumnKind::Numeric, {}, {}};
  RawColumn rate{"rate_ratio", ColumnKind::Numeric, {}, {}};
  RawColumn diff{"pkt_diff", ColumnKind::Numeric, {}, {}};
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    const auto f = engineer_features(sload[r], dload[r], sbytes[r], dur[r], std::llround(spkts[r]),
                                     std::llround(dpkts[r]));
    total.numbers.push_back(f.total_load);
    rate.numbers.push_back(f.rate_ratio);
    diff.numbers.push_back(f.pkt_diff);
  }
  ds.columns.push_back(std::move(total));
  ds.columns.push_back(std::move(rate));
  ds.columns.push_back(std::move(diff));
}

// ---------------------------------------------------------------- splitting and weighting

SplitIndices stratified_split(const std::vector<std::string>& strata, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, ErrorKind::InvalidArgument, "stratified split: fraction must be in (0,1)");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);

  std::mt19937_64 rng(seed);
  SplitIndices out;
  for (auto& [name, idx] : groups) {
    if (idx.size() < 2) {
      auto& larger = fraction >= 0.5 ? out.first : out.second;
      larger.insert(larger.end(), idx.begin(), idx.end());
      out.warnings.push_back("stratum '" + name + "' has " + std::to_string(idx.size()) +
                             " sample(s); assigned wholly to the larger split");
      continue;
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
    out.first.insert(out.first.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    out.second.insert(out.second.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  return out;
}

FeatureMatrix take_rows(const FeatureMatrix& fm, const std::vector<std::size_t>& rows) {
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  FeatureMatrix out;
  out.data = fm.data(idx, Eigen::all);
  if (fm.labels) out.labels = Vector((*fm.labels)(idx));
  return out;
}

std::pair<FeatureMatrix, FeatureMatrix> stratified_split(const FeatureMatrix& fm,
                                                         const std::vector<std::string>& strata,
                                                         double fraction, std::uint64_t seed) {
  require(strata.size() == fm.rows(), ErrorKind::Shape, "stratified split: strata length differs from row count");
  const SplitIndices s = stratified_split(strata, fraction, seed);
  return {take_rows(fm, s.first), take_rows(fm, s.second)};
}

std::vector<double> balanced_sample_weights(const Vector& labels) {
  std::size_t counts[2] = {0, 0};
  for (Eigen::Index i = 0; i < labels.size(); ++i) ++counts[labels[i] >= 0.5 ? 1 : 0];
  require(counts[0] > 0 && counts[1] > 0, ErrorKind::InvalidArgument,
          "balanced sampling needs both classes present");
  std::vector<double> w(static_cast<std::size_t>(labels.size()));
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    w[static_cast<std::size_t>(i)] = 1.0 / static_cast<double>(counts[labels[i] >= 0.5 ? 1 : 0]);
  }
  return w;
}

std::vector<std::size_t> weighted_draws(const std::vector<double>& weights, std::size_t count,
                                        std::mt19937_64& rng) {
  require(!weights.empty(), ErrorKind::InvalidArgument, "weighted draws: no weights");
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = dist(rng);
  return out;
}

// ---------------------------------------------------------------- synthetic data

FeatureMatrix generate_synthetic(std::size_t n_normal, std::size_t n_attack, std::size_t dim, double separation,
                                 std::uint64_t seed) {
  require(dim >= 2, ErrorKind::InvalidArgument, "synthetic data needs dim >= 2");
  require(n_normal >= 1 && n_attack >= 1, ErrorKind::InvalidArgument, "synthetic data needs both classes");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t n = n_normal + n_attack;
  const double offset = separation / std::sqrt(static_cast<double>(dim));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  FeatureMatrix out;
  out.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  Vector labels(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const bool attack = order[i] >= n_normal;
    const auto r = static_cast<Eigen::Index>(i);
    labels[r] = attack ? 1.0 : 0.0;
    for (Eigen::Index c = 0; c < out.data.cols(); ++c) {
      out.data(r, c) = gauss(rng) + (attack ? offset : 0.0);
    }
  }
  out.labels = std::move(labels);
  return out;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& fm,
                       const std::vector<std::string>& names) {
  require(names.empty() || names.size() == fm.cols(), ErrorKind::InvalidArgument,
          "feature CSV: column name count does not match matrix width");
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  for (std::size_t c = 0; c < fm.cols(); ++c) {
    if (c) out << ',';
    out << (names.empty() ? "f" + std::to_string(c) : names[c]);
  }
  if (fm.labels) out << ",label";
  out << '\n';
  for (Eigen::Index r = 0; r < fm.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < fm.data.cols(); ++c) {
      if (c) out << ',';
      out << format_double(fm.data(r, c));
    }
    if (fm.labels) out << ',' << static_cast<int>((*fm.labels)[r]);
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace aocids
