#include "core/harness.hpp"

#include "core/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace aocids {

using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------- quoted rows

const std::vector<ReferenceRow>& quoted_baselines() {
  static const std::vector<ReferenceRow> rows{
      {"DTC (Online)", 85.95, 82.32, 94.86, 88.15, std::nullopt},
      {"RF (Online)", 85.93, 80.25, 98.75, 88.55, std::nullopt},
      {"XGBoost (Online)", 86.97, 82.85, 98.29, 89.26, std::nullopt},
      {"FeCo", 72.50, 91.18, 55.41, 68.93, std::nullopt},
      {"CIDS", 82.61, 78.91, 96.28, 86.03, std::nullopt},
  };
  return rows;
}

const ReferenceRow& quoted_published_base() {
  static const ReferenceRow row{"AOC-IDS (published)", 89.19, 90.65, 89.70, 90.14, 67202};
  return row;
}

const ReferenceRow& quoted_replication() {
  static const ReferenceRow row{"AOC-IDS (replication)", 89.39, 90.48, 89.85, 90.12, 67202};
  return row;
}

const ReferenceRow& quoted_boost() {
  static const ReferenceRow row{"XGBoost-BalSamp", 95.45, 95.26, 95.33, 95.29, std::nullopt};
  return row;
}

std::optional<ReferenceRow> reference_for_run(const std::string& run) {
  if (run == "base") return quoted_replication();
  static const std::vector<std::pair<std::string, ReferenceRow>> rows{
      {"imp2", {"PseudoFilter", 90.44, 94.92, 87.31, 90.96, 67202}},
      {"imp3", {"MixupAug", 89.80, std::nullopt, std::nullopt, 90.50, 67202}},
      {"imp4", {"LiteAE", 88.50, std::nullopt, std::nullopt, 89.80, 29830}},
      {"imp23", {"PseudoFilter + MixupAug", 90.60, std::nullopt, std::nullopt, 91.20, 67202}},
      {"imp24", {"PseudoFilter + LiteAE", 90.20, std::nullopt, std::nullopt, 90.70, 29830}},
      {"imp234", {"PseudoFilter + MixupAug + LiteAE", 90.88, 94.42, 88.67, 91.45, 29830}},
  };
  for (const auto& [name, row] : rows) {
    if (name == run) return row;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- plan

void AblationPlan::validate() const {
  require(!runs.empty(), ErrorKind::InvalidArgument, "ablation plan has no runs");
  require(!seeds.empty(), ErrorKind::InvalidArgument, "ablation plan has no seeds");
  std::set<std::string> names;
  for (const auto& r : runs) {
    require(names.insert(r.name).second, ErrorKind::InvalidArgument, "duplicate run name in plan: " + r.name);
    r.validate();
  }
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  require(unique.size() == seeds.size(), ErrorKind::InvalidArgument, "duplicate seed in plan");
}

AblationPlan AblationPlan::standard() {
  AblationPlan plan;
  for (const char* name : {"base", "imp2", "imp3", "imp4", "imp23", "imp24", "imp234"}) {
    plan.runs.push_back(preset_config(name));
  }
  return plan;
}

AblationResults run_ablation(const AblationPlan& plan, const FeatureMatrix& train, const FeatureMatrix& test,
                             unsigned threads, const CellProgressFn& progress) {
  plan.validate();
  AblationResults out;
  for (const auto& r : plan.runs) out.runs.push_back(r.name);
  out.seeds = plan.seeds;
  out.cells.resize(plan.runs.size() * plan.seeds.size());

  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < out.cells.size(); i = next++) {
      const ExperimentConfig& base = plan.runs[i / plan.seeds.size()];
      CellResult& cell = out.cells[i];
      cell.run = base.name;
      cell.seed = plan.seeds[i % plan.seeds.size()];
      try {
        ExperimentConfig cfg = base;
        cfg.stream.seed = cell.seed;
        cell.result = run_stream(train, test, cfg, plan.max_batches);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(cell);
      }
    }
  };

  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(out.cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

// ---------------------------------------------------------------- summaries

std::optional<std::size_t> select_best(const std::vector<const CellResult*>& cells) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i]->ok) continue;
    if (!best) {
      best = i;
      continue;
    }
    const MetricSet& a = cells[i]->result.final.metrics;
    const MetricSet& b = cells[*best]->result.final.metrics;
    if (a.accuracy > b.accuracy || (a.accuracy == b.accuracy && a.f1 > b.f1)) best = i;
  }
  return best;
}

std::vector<RunSummary> summarize(const AblationResults& results) {
  std::vector<RunSummary> out;
  for (const auto& run : results.runs) {
    RunSummary s;
    s.run = run;
    std::vector<const CellResult*> cells;
    for (const auto& c : results.cells) {
      if (c.run != run) continue;
      cells.push_back(&c);
      if (c.ok) {
        ++s.seeds_ok;
        s.mean_accuracy += c.result.final.metrics.accuracy;
        s.mean_f1 += c.result.final.metrics.f1;
        s.param_count = c.result.param_count;
      } else {
        ++s.seeds_failed;
      }
    }
    if (s.seeds_ok > 0) {
      s.mean_accuracy /= static_cast<double>(s.seeds_ok);
      s.mean_f1 /= static_cast<double>(s.seeds_ok);
    }
    if (auto best = select_best(cells)) {
      s.best_seed = cells[*best]->seed;
      s.best = cells[*best]->result.final;
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------- serialization

namespace {

ojson confusion_json(const ConfusionMatrix& cm) {
  ojson j;
  j["tp"] = cm.tp;
  j["tn"] = cm.tn;
  j["fp"] = cm.fp;
  j["fn"] = cm.fn;
  return j;
}

Evaluation evaluation_from_json(const ojson& j) {
  ConfusionMatrix cm;
  cm.tp = j.at("tp").get<std::uint64_t>();
  cm.tn = j.at("tn").get<std::uint64_t>();
  cm.fp = j.at("fp").get<std::uint64_t>();
  cm.fn = j.at("fn").get<std::uint64_t>();
  return {cm, metrics_from_confusion(cm)};
}

ojson record_json(const BatchRecord& r) {
  ojson j;
  j["batch"] = r.batch;
  j["batch_size"] = r.batch_size;
  j["accepted"] = r.accepted;
  j["rejected"] = r.rejected;
  j["flipped"] = r.flipped;
  j["clean_pool"] = r.clean_pool;
  j["pseudo_pool"] = r.pseudo_pool;
  j["learning_rate"] = r.learning_rate;
  j["train_loss"] = r.train_loss;
  if (r.test) j["test"] = confusion_json(r.test->confusion);
  return j;
}

BatchRecord record_from_json(const ojson& j) {
  BatchRecord r;
  r.batch = j.at("batch").get<std::size_t>();
  r.batch_size = j.at("batch_size").get<std::size_t>();
  r.accepted = j.at("accepted").get<std::size_t>();
  r.rejected = j.at("rejected").get<std::size_t>();
  r.flipped = j.at("flipped").get<std::size_t>();
  r.clean_pool = j.at("clean_pool").get<std::size_t>();
  r.pseudo_pool = j.at("pseudo_pool").get<std::size_t>();
  r.learning_rate = j.at("learning_rate").get<double>();
  r.train_loss = j.at("train_loss").get<double>();
  r.acceptance_rate =
      r.batch_size > 0 ? static_cast<double>(r.accepted) / static_cast<double>(r.batch_size) : 0.0;
  if (j.contains("test")) r.test = evaluation_from_json(j.at("test"));
  return r;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string pct(std::optional<double> v) { return v ? fmt("%.2f", *v) : std::string("---"); }

std::string count_str(std::optional<std::size_t> v) {
  if (!v) return "---";
  std::string digits = std::to_string(*v);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

ojson optional_number(std::optional<double> v) { return v ? ojson(*v) : ojson(nullptr); }

ojson reference_json(const ReferenceRow& r) {
  ojson j;
  j["method"] = r.method;
  j["accuracy"] = optional_number(r.accuracy);
  j["precision"] = optional_number(r.precision);
  j["recall"] = optional_number(r.recall);
  j["f1"] = optional_number(r.f1);
  j["params"] = r.params ? ojson(*r.params) : ojson(nullptr);
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string results_to_json(const AblationResults& results) {
  ojson j;
  j["format"] = "aocids-ablation";
  j["version"] = 1;
  j["runs"] = results.runs;
  j["seeds"] = results.seeds;
  ojson cells = ojson::array();
  for (const auto& c : results.cells) {
    ojson cj;
    cj["run"] = c.run;
    cj["seed"] = c.seed;
    cj["ok"] = c.ok;
    if (!c.ok) {
      cj["error"] = c.error;
    } else {
      const StreamResult& r = c.result;
      cj["param_count"] = r.param_count;
      cj["initial_size"] = r.initial_size;
      cj["stream_size"] = r.stream_size;
      cj["initial"] = confusion_json(r.initial.confusion);
      cj["final"] = confusion_json(r.final.confusion);
      ojson hist = ojson::array();
      for (const auto& rec : r.history) hist.push_back(record_json(rec));
      cj["history"] = std::move(hist);
    }
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j.dump(1) + "\n";
}

AblationResults results_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorKind::Parse, std::string("results file is not valid JSON: ") + e.what());
  }
  try {
    require(j.value("format", std::string()) == "aocids-ablation", ErrorKind::Parse,
            "not an ablation results file");
    require(j.at("version").get<int>() == 1, ErrorKind::Parse, "unsupported results version");
    AblationResults out;
    out.runs = j.at("runs").get<std::vector<std::string>>();
    out.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& cj : j.at("cells")) {
      CellResult c;
      c.run = cj.at("run").get<std::string>();
      c.seed = cj.at("seed").get<std::uint64_t>();
      c.ok = cj.at("ok").get<bool>();
      c.result.name = c.run;
      c.result.seed = c.seed;
      if (!c.ok) {
        c.error = cj.value("error", std::string());
      } else {
        c.result.param_count = cj.at("param_count").get<std::size_t>();
        c.result.initial_size = cj.at("initial_size").get<std::size_t>();
        c.result.stream_size = cj.at("stream_size").get<std::size_t>();
        c.result.initial = evaluation_from_json(cj.at("initial"));
        c.result.final = evaluation_from_json(cj.at("final"));
        for (const auto& rj : cj.at("history")) c.result.history.push_back(record_from_json(rj));
      }
      out.cells.push_back(std::move(c));
    }
    return out;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed results file: ") + e.what());
  }
}

void save_results(const std::filesystem::path& path, const AblationResults& results) {
  write_text(path, results_to_json(results));
}

AblationResults load_results(const std::filesystem::path& path) { return results_from_json(read_text(path)); }

// ---------------------------------------------------------------- rendering

std::string render_table(const AblationResults& results) {
  struct Line {
    std::string cols[10];
  };
  std::vector<Line> lines;
  lines.push_back({{"Method", "Source", "Acc", "Pre", "Rec", "F1", "Params", "Ref Acc", "Ref F1", "Mean Acc"}});

  auto quoted = [&](const ReferenceRow& r) {
    lines.push_back({{r.method, "quoted", pct(r.accuracy), pct(r.precision), pct(r.recall), pct(r.f1),
                      count_str(r.params), "", "", ""}});
  };
  for (const auto& r : quoted_baselines()) quoted(r);
  quoted(quoted_published_base());
  quoted(quoted_boost());

  for (const auto& s : summarize(results)) {
    const auto ref = reference_for_run(s.run);
    Line l{{s.run, "measured"}};
    if (s.best_seed) {
      const MetricSet& m = s.best.metrics;
      l.cols[1] = "measured (seed " + std::to_string(*s.best_seed) + ")";
      l.cols[2] = pct(m.accuracy);
      l.cols[3] = m.precision_undefined ? "n/a" : pct(m.precision);
      l.cols[4] = m.recall_undefined ? "n/a" : pct(m.recall);
      l.cols[5] = pct(m.f1);
      l.cols[6] = count_str(s.param_count);
      l.cols[9] = pct(s.mean_accuracy);
    } else {
      l.cols[1] = "failed";
      for (int c : {2, 3, 4, 5, 6, 9}) l.cols[c] = "---";
    }
    l.cols[7] = ref ? pct(ref->accuracy) : "---";
    l.cols[8] = ref ? pct(ref->f1) : "---";
    lines.push_back(std::move(l));
  }

  std::size_t width[10] = {};
  for (const auto& l : lines) {
    for (int c = 0; c < 10; ++c) width[c] = std::max(width[c], l.cols[c].size());
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string row;
    for (int c = 0; c < 10; ++c) {
      const std::string& cell = lines[i].cols[c];
      const std::size_t pad = width[c] - cell.size();
      if (c < 2) {
        row += cell + std::string(pad, ' ');
      } else {
        row += std::string(pad, ' ') + cell;
      }
      if (c < 9) row += "  ";
    }
    while (!row.empty() && row.back() == ' ') row.pop_back();
    os << row << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      os << std::string(total - 2, '-') << '\n';
    }
  }

  os << "\nquoted rows are published figures, not recomputed here.\n";
  os << "Ref columns: published figures for the matching configuration.\n";
  os << "full-size runs with classifier heads measure 67,462 parameters; the 67,202 reference "
        "counts the autoencoder without heads.\n";
  for (const auto& c : results.cells) {
    if (!c.ok) os << "failed: " << c.run << " seed " << c.seed << ": " << c.error << '\n';
  }
  return os.str();
}

std::string render_report_json(const AblationResults& results) {
  ojson j;
  j["format"] = "aocids-report";
  j["version"] = 1;
  ojson quoted = ojson::array();
  for (const auto& r : quoted_baselines()) quoted.push_back(reference_json(r));
  quoted.push_back(reference_json(quoted_published_base()));
  quoted.push_back(reference_json(quoted_replication()));
  quoted.push_back(reference_json(quoted_boost()));
  j["quoted"] = std::move(quoted);

  ojson runs = ojson::array();
  for (const auto& s : summarize(results)) {
    ojson r;
    r["run"] = s.run;
    r["seeds_ok"] = s.seeds_ok;
    r["seeds_failed"] = s.seeds_failed;
    if (s.best_seed) {
      r["best_seed"] = *s.best_seed;
      r["param_count"] = s.param_count;
      r["accuracy"] = s.best.metrics.accuracy;
      r["precision"] = s.best.metrics.precision;
      r["recall"] = s.best.metrics.recall;
      r["f1"] = s.best.metrics.f1;
      r["precision_undefined"] = s.best.metrics.precision_undefined;
      r["recall_undefined"] = s.best.metrics.recall_undefined;
      r["confusion"] = confusion_json(s.best.confusion);
      r["mean_accuracy"] = s.mean_accuracy;
      r["mean_f1"] = s.mean_f1;
    }
    if (auto ref = reference_for_run(s.run)) r["reference"] = reference_json(*ref);
    runs.push_back(std::move(r));
  }
  j["runs"] = std::move(runs);

  ojson seeds = ojson::array();
  for (const auto& c : results.cells) {
    ojson cj;
    cj["run"] = c.run;
    cj["seed"] = c.seed;
    cj["ok"] = c.ok;
    if (c.ok) {
      cj["accuracy"] = c.result.final.metrics.accuracy;
      cj["f1"] = c.result.final.metrics.f1;
    } else {
      cj["error"] = c.error;
    }
    seeds.push_back(std::move(cj));
  }
  j["cells"] = std::move(seeds);
  return j.dump(1) + "\n";
}

std::string render_plotdata(const AblationResults& results) {
  std::ostringstream os;
  os << "run,seed,batch,accuracy,precision,recall,f1,acceptance_rate,pseudo_pool\n";
  for (const auto& s : summarize(results)) {
    if (!s.best_seed) continue;
    for (const auto& c : results.cells) {
      if (c.run != s.run || c.seed != *s.best_seed || !c.ok) continue;
      for (const auto& r : c.result.history) {
        if (!r.test) continue;
        const MetricSet& m = r.test->metrics;
        os << c.run << ',' << c.seed << ',' << r.batch << ',' << fmt("%.4f", m.accuracy) << ','
           << fmt("%.4f", m.precision) << ',' << fmt("%.4f", m.recall) << ',' << fmt("%.4f", m.f1) << ','
           << fmt("%.6f", r.acceptance_rate) << ',' << r.pseudo_pool << '\n';
      }
    }
  }
  return os.str();
}

std::vector<std::filesystem::path> emit_report(const AblationResults& results, const std::filesystem::path& out_dir,
                                               ReportFormat format) {
  require(!results.cells.empty(), ErrorKind::InvalidArgument, "no results to report");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec, ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  if (format != ReportFormat::Plotdata) {
    written.push_back(out_dir / "report.txt");
    write_text(written.back(), render_table(results));
    written.push_back(out_dir / "report.json");
    write_text(written.back(), render_report_json(results));
  }
  if (format != ReportFormat::Table) {
    written.push_back(out_dir / "plotdata.csv");
    write_text(written.back(), render_plotdata(results));
  }
  return written;
}

// ---------------------------------------------------------------- data loading and export

namespace {

Schema schema_for(const std::filesystem::path& csv) {
  const std::vector<std::string> header = read_csv_header(csv);
  const Schema unsw = Schema::unsw_nb15();
  const std::set<std::string> have(header.begin(), header.end());
  bool matches = have.size() == unsw.columns.size();
  for (const auto& c : unsw.columns) matches = matches && have.count(c.name) > 0;
  return matches ? unsw : Schema::all_numeric(header);
}

}  // namespace

LoadedData load_train_test(const std::filesystem::path& train_csv, const std::filesystem::path& test_csv) {
  const RawDataset train = load_dataset(train_csv, schema_for(train_csv));
  const RawDataset test = load_dataset(test_csv, schema_for(test_csv));
  Preprocessor pre = Preprocessor::fit(train);
  FeatureMatrix tr = pre.apply(train);
  FeatureMatrix te = pre.apply(test);
  return {std::move(pre), std::move(tr), std::move(te)};
}

BoostExportSummary export_boost_data(const std::filesystem::path& train_csv, const std::filesystem::path& test_csv,
                                     const std::filesystem::path& out_dir, std::uint64_t seed, double valid_fraction,
                                     const std::string& stratum_column) {
  require(valid_fraction > 0.0 && valid_fraction < 1.0, ErrorKind::InvalidArgument,
          "validation fraction must lie in (0, 1)");
  RawDataset train = load_dataset(train_csv, schema_for(train_csv));
  RawDataset test = load_dataset(test_csv, schema_for(test_csv));
  BoostExportSummary summary;
  const bool engineered = train.find("sload") != nullptr;
  if (engineered) {
    append_engineered_features(train);
    append_engineered_features(test);
  } else {
    summary.warnings.push_back("traffic columns missing; engineered features skipped");
  }

  const Preprocessor pre = Preprocessor::fit(train);
  const FeatureMatrix full = pre.apply(train);
  const FeatureMatrix held_out = pre.apply(test);

  std::vector<std::string> strata;
  if (const RawColumn* col = train.find(stratum_column); col != nullptr && !col->text.empty()) {
    strata = col->text;
  } else {
    summary.warnings.push_back("no '" + stratum_column + "' column; stratifying on the label");
    for (int l : train.labels) strata.push_back(std::to_string(l));
  }
  SplitIndices split = stratified_split(strata, 1.0 - valid_fraction, seed);
  for (auto& w : split.warnings) summary.warnings.push_back(std::move(w));
  const FeatureMatrix part_train = take_rows(full, split.first);
  const FeatureMatrix part_valid = take_rows(full, split.second);
  const std::vector<double> weights = balanced_sample_weights(*part_train.labels);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec, ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());
  const std::vector<std::string> names = pre.feature_names();
  auto emit = [&](const std::string& file, const FeatureMatrix& fm) {
    summary.files.push_back(out_dir / file);
    write_feature_csv(summary.files.back(), fm, names);
  };
  emit("boost_train.csv", part_train);
  emit("boost_valid.csv", part_valid);
  emit("boost_test.csv", held_out);

  std::ostringstream w;
  w << "weight\n";
  for (double v : weights) w << fmt("%.17g", v) << '\n';
  summary.files.push_back(out_dir / "boost_train_weights.csv");
  write_text(summary.files.back(), w.str());

  summary.files.push_back(out_dir / "preprocessor.json");
  pre.save(summary.files.back());

  summary.train_rows = part_train.rows();
  summary.valid_rows = part_valid.rows();
  summary.test_rows = held_out.rows();
  summary.feature_count = names.size();

  ojson manifest;
  manifest["format"] = "aocids-boost-export";
  manifest["version"] = 1;
  manifest["seed"] = seed;
  manifest["valid_fraction"] = valid_fraction;
  manifest["engineered_features"] = engineered;
  manifest["train_rows"] = summary.train_rows;
  manifest["valid_rows"] = summary.valid_rows;
  manifest["test_rows"] = summary.test_rows;
  manifest["feature_count"] = summary.feature_count;
  manifest["warnings"] = summary.warnings;
  ojson files = ojson::array();
  for (const auto& f : summary.files) files.push_back(f.filename().string());
  manifest["files"] = std::move(files);
  summary.files.push_back(out_dir / "manifest.json");
  write_text(summary.files.back(), manifest.dump(1) + "\n");
  return summary;
}

}  // namespace aocids
