// Command-line front end over the C API.

#include <aocids/aocids.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

// Carries an aoc_status out of a command handler.
struct CommandError : std::runtime_error {
  CommandError(aoc_status s, const std::string& msg) : std::runtime_error(msg), status(s) {}
  aoc_status status;
};

void check(aoc_status s, const std::string& context) {
  if (s != AOC_OK) throw CommandError(s, context + ": " + aoc_last_error());
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& o) noexcept : ptr(o.ptr) { o.ptr = nullptr; }
  ~Handle() { Free(ptr); }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using Config = Handle<aoc_config, aoc_config_free>;
using Dataset = Handle<aoc_dataset, aoc_data_free>;
using Model = Handle<aoc_model, aoc_model_free>;
using Stream = Handle<aoc_stream_result, aoc_stream_free>;
using Plan = Handle<aoc_plan, aoc_plan_free>;
using Ablation = Handle<aoc_ablation, aoc_ablation_free>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  aoc_string_free(s);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CommandError(AOC_ERR_IO, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw CommandError(AOC_ERR_IO, "cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CommandError(AOC_ERR_IO, "cannot create " + dir.string() + ": " + ec.message());
}

nlohmann::ordered_json metrics_json(const aoc_metrics& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["tp"] = m.tp;
  j["tn"] = m.tn;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  return j;
}

void print_metrics(const char* label, const aoc_metrics& m) {
  std::printf("%s: acc %.2f  pre %.2f  rec %.2f  f1 %.2f\n", label, m.accuracy, m.precision, m.recall, m.f1);
}

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::vector<std::string> data;
};

void add_common(CLI::App* cmd, Common& c, bool needs_data) {
  cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  auto* data = cmd->add_option("--data", c.data, "training and test CSV files")->expected(2);
  if (needs_data) data->required();
}

Config resolve_config(const Common& c) {
  Config cfg;
  if (!c.config.empty()) {
    check(aoc_config_load(c.config.c_str(), cfg.out()), "config");
    if (!c.preset.empty()) throw CommandError(AOC_ERR_INVALID_ARGUMENT, "--preset and --config are exclusive");
  } else {
    check(aoc_config_preset(c.preset.empty() ? "base" : c.preset.c_str(), cfg.out()), "preset");
  }
  if (c.seed) check(aoc_config_set_seed(cfg.get(), *c.seed), "seed");
  return cfg;
}

void load_data(const Common& c, const fs::path& preprocessor, Dataset& train, Dataset& test) {
  check(aoc_data_load_pair(c.data[0].c_str(), c.data[1].c_str(), preprocessor.string().c_str(), train.out(),
                           test.out()),
        "data");
  size_t rows = 0;
  size_t cols = 0;
  aoc_data_shape(train.get(), &rows, &cols);
  std::printf("train: %zu rows x %zu features\n", rows, cols);
  aoc_data_shape(test.get(), &rows, nullptr);
  std::printf("test:  %zu rows\n", rows);
}

void cmd_train(const Common& c) {
  const fs::path out = c.out;
  ensure_dir(out);
  Config cfg = resolve_config(c);
  Dataset train;
  Dataset test;
  load_data(c, out / "preprocessor.json", train, test);
  Model model;
  check(aoc_model_train(cfg.get(), train.get(), model.out()), "train");
  check(aoc_model_save(model.get(), (out / "model.ckpt").string().c_str()), "save model");
  check(aoc_config_save(cfg.get(), (out / "config.json").string().c_str()), "save config");
  aoc_metrics m{};
  check(aoc_model_evaluate(model.get(), test.get(), &m), "evaluate");
  size_t params = 0;
  aoc_model_param_count(model.get(), &params);
  nlohmann::ordered_json j;
  j["params"] = params;
  j["test"] = metrics_json(m);
  write_file(out / "metrics.json", j.dump(2) + "\n");
  std::printf("params: %zu\n", params);
  print_metrics("test", m);
}

void on_batch(const aoc_batch_record* r, void*) {
  std::fprintf(stderr, "batch %3zu  accepted %5zu/%-5zu  pool %7zu  acc %.2f\n", r->batch, r->accepted,
               r->batch_size, r->clean_pool + r->pseudo_pool, r->has_test ? r->test.accuracy : 0.0);
}

void cmd_stream(const Common& c, size_t max_batches, bool quiet) {
  const fs::path out = c.out;
  ensure_dir(out);
  Config cfg = resolve_config(c);
  Dataset train;
  Dataset test;
  load_data(c, out / "preprocessor.json", train, test);
  Stream result;
  check(aoc_stream_run(cfg.get(), train.get(), test.get(), max_batches, quiet ? nullptr : on_batch, nullptr,
                       result.out()),
        "stream");
  check(aoc_stream_write_history(result.get(), (out / "history.jsonl").string().c_str()), "history");
  check(aoc_config_save(cfg.get(), (out / "config.json").string().c_str()), "save config");
  Ablation single;
  check(aoc_stream_to_ablation(result.get(), single.out()), "results");
  check(aoc_ablation_save(single.get(), (out / "results.json").string().c_str()), "save results");
  check(aoc_ablation_emit_report(single.get(), out.string().c_str(), AOC_REPORT_ALL), "report");
  aoc_metrics initial{};
  aoc_metrics final_m{};
  aoc_stream_initial_metrics(result.get(), &initial);
  aoc_stream_final_metrics(result.get(), &final_m);
  size_t batches = 0;
  aoc_stream_batch_count(result.get(), &batches);
  print_metrics("initial", initial);
  print_metrics("final", final_m);
  std::printf("batches: %zu\n", batches);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void on_cell(const aoc_cell_info* c, void*) {
  if (c->ok) {
    std::fprintf(stderr, "%-8s seed %-3llu acc %.2f  f1 %.2f\n", c->run, static_cast<unsigned long long>(c->seed),
                 c->final_metrics.accuracy, c->final_metrics.f1);
  } else {
    std::fprintf(stderr, "%-8s seed %-3llu failed\n", c->run, static_cast<unsigned long long>(c->seed));
  }
}

void cmd_ablate(const Common& c, const std::string& runs, const std::string& seeds, size_t max_batches,
                unsigned threads) {
  const fs::path out = c.out;
  ensure_dir(out);
  Dataset train;
  Dataset test;
  load_data(c, out / "preprocessor.json", train, test);

  const std::string patch = c.config.empty() ? std::string() : read_file(c.config);
  Plan plan;
  check(aoc_plan_create(plan.out()), "plan");
  for (const auto& name : split_list(runs)) {
    Config preset;
    check(aoc_config_preset(name.c_str(), preset.out()), "run " + name);
    if (patch.empty()) {
      check(aoc_plan_add_run(plan.get(), preset.get()), "run " + name);
    } else {
      Config patched;
      check(aoc_config_patch(preset.get(), patch.c_str(), patched.out()), "config for " + name);
      check(aoc_config_set_name(patched.get(), name.c_str()), "run " + name);
      check(aoc_plan_add_run(plan.get(), patched.get()), "run " + name);
    }
  }

  std::vector<std::uint64_t> seed_list;
  if (!seeds.empty()) {
    for (const auto& s : split_list(seeds)) {
      try {
        seed_list.push_back(std::stoull(s));
      } catch (const std::exception&) {
        throw CommandError(AOC_ERR_INVALID_ARGUMENT, "bad seed '" + s + "'");
      }
    }
  } else {
    const std::uint64_t first = c.seed.value_or(0);
    for (std::uint64_t i = 0; i < 5; ++i) seed_list.push_back(first + i);
  }
  check(aoc_plan_set_seeds(plan.get(), seed_list.data(), seed_list.size()), "seeds");
  check(aoc_plan_set_max_batches(plan.get(), max_batches), "max batches");

  Ablation results;
  check(aoc_ablation_run(plan.get(), train.get(), test.get(), threads, on_cell, nullptr, results.out()), "ablate");
  check(aoc_ablation_save(results.get(), (out / "results.json").string().c_str()), "save results");
  check(aoc_ablation_emit_report(results.get(), out.string().c_str(), AOC_REPORT_ALL), "report");
  char* table = nullptr;
  check(aoc_ablation_render_table(results.get(), &table), "table");
  std::fputs(take_string(table).c_str(), stdout);
}

void cmd_report(const Common& c, const std::string& results_path, const std::string& format) {
  Ablation results;
  check(aoc_ablation_load(results_path.c_str(), results.out()), "results");
  aoc_report_format f = AOC_REPORT_ALL;
  if (format == "table") {
    f = AOC_REPORT_TABLE;
  } else if (format == "plotdata") {
    f = AOC_REPORT_PLOTDATA;
  }
  check(aoc_ablation_emit_report(results.get(), c.out.c_str(), f), "report");
  if (f != AOC_REPORT_PLOTDATA) {
    char* table = nullptr;
    check(aoc_ablation_render_table(results.get(), &table), "table");
    std::fputs(take_string(table).c_str(), stdout);
  }
}

void cmd_synth(const Common& c, size_t n_normal, size_t n_attack, size_t n_test, size_t dim, double separation) {
  const fs::path out = c.out;
  ensure_dir(out);
  const std::uint64_t seed = c.seed.value_or(0);
  Dataset train;
  Dataset test;
  check(aoc_data_synthetic(n_normal, n_attack, dim, separation, seed * 2 + 1, train.out()), "synth");
  check(aoc_data_synthetic(n_test / 2, n_test - n_test / 2, dim, separation, seed * 2 + 2, test.out()), "synth");
  check(aoc_data_write_csv(train.get(), (out / "train.csv").string().c_str()), "write train");
  check(aoc_data_write_csv(test.get(), (out / "test.csv").string().c_str()), "write test");
  std::printf("wrote %s and %s\n", (out / "train.csv").string().c_str(), (out / "test.csv").string().c_str());
}

void cmd_export_boost(const Common& c, double valid_fraction) {
  aoc_boost_summary s{};
  check(aoc_export_boost(c.data[0].c_str(), c.data[1].c_str(), c.out.c_str(), c.seed.value_or(0), valid_fraction, &s),
        "export-boost");
  std::printf("train %zu  valid %zu  test %zu  features %zu  warnings %zu\n", s.train_rows, s.valid_rows,
              s.test_rows, s.feature_count, s.warning_count);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online intrusion detection with pseudo-label filtering, Mixup and a compact autoencoder"};
  app.set_version_flag("--version", std::string(aoc_version()));
  app.require_subcommand(1);

  Common train_opts;
  auto* train = app.add_subcommand("train", "initial supervised training only");
  add_common(train, train_opts, true);
  train->add_option("--preset", train_opts.preset, "named configuration (base, imp2, ..., imp234)");

  Common stream_opts;
  size_t stream_max_batches = 0;
  bool quiet = false;
  auto* stream = app.add_subcommand("stream", "full online run: initial training then the stream");
  add_common(stream, stream_opts, true);
  stream->add_option("--preset", stream_opts.preset, "named configuration (base, imp2, ..., imp234)");
  stream->add_option("--max-batches", stream_max_batches, "stop after this many stream batches (0 = all)");
  stream->add_flag("--quiet", quiet, "no per-batch progress");

  Common ablate_opts;
  std::string runs = "base,imp2,imp3,imp4,imp23,imp24,imp234";
  std::string seeds;
  size_t ablate_max_batches = 0;
  unsigned threads = 1;
  auto* ablate = app.add_subcommand("ablate", "run the ablation matrix; --config is applied on top of every run");
  add_common(ablate, ablate_opts, true);
  ablate->add_option("--runs", runs, "comma-separated run names")->capture_default_str();
  ablate->add_option("--seeds", seeds, "comma-separated seeds (default: --seed .. --seed+4)");
  ablate->add_option("--max-batches", ablate_max_batches, "stop each run after this many batches (0 = all)");
  ablate->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 256u));

  Common report_opts;
  std::string results_path;
  std::string format = "all";
  auto* report = app.add_subcommand("report", "emit tables and plot data from stored results");
  add_common(report, report_opts, false);
  report->add_option("--results", results_path, "results.json from stream or ablate")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--format", format, "table, plotdata or all")
      ->check(CLI::IsMember({"table", "plotdata", "all"}))
      ->capture_default_str();

  Common synth_opts;
  size_t n_normal = 3000;
  size_t n_attack = 3000;
  size_t n_test = 2000;
  size_t dim = 20;
  double separation = 6.0;
  auto* synth = app.add_subcommand("synth", "write a synthetic train/test pair");
  add_common(synth, synth_opts, false);
  synth->add_option("--normal", n_normal, "normal training rows")->capture_default_str();
  synth->add_option("--attack", n_attack, "attack training rows")->capture_default_str();
  synth->add_option("--test", n_test, "test rows (half of each class)")->capture_default_str();
  synth->add_option("--dim", dim, "feature count")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--separation", separation, "distance between class means")->capture_default_str();

  Common boost_opts;
  double valid_fraction = 0.2;
  auto* boost = app.add_subcommand("export-boost", "write engineered, split and weighted data for a tree booster");
  add_common(boost, boost_opts, true);
  boost->add_option("--valid-fraction", valid_fraction, "held-out validation share")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) cmd_train(train_opts);
    if (*stream) cmd_stream(stream_opts, stream_max_batches, quiet);
    if (*ablate) cmd_ablate(ablate_opts, runs, seeds, ablate_max_batches, threads);
    if (*report) cmd_report(report_opts, results_path, format);
    if (*synth) cmd_synth(synth_opts, n_normal, n_attack, n_test, dim, separation);
    if (*boost) cmd_export_boost(boost_opts, valid_fraction);
  } catch (const CommandError& e) {
    std::fprintf(stderr, "error [%s]: %s\n", aoc_status_name(e.status), e.what());
    return static_cast<int>(e.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [%s]: %s\n", aoc_status_name(AOC_ERR_INTERNAL), e.what());
    return static_cast<int>(AOC_ERR_INTERNAL);
  }
  return 0;
}
