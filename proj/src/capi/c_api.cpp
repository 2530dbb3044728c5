#include "aocids/aocids.h"

#include "core/adm.hpp"
#include "core/config.hpp"
#include "core/data.hpp"
#include "core/error.hpp"
#include "core/harness.hpp"
#include "core/online.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <optional>
#include <string>

using namespace aocids;

struct aoc_config {
  ExperimentConfig cfg;
};

struct aoc_dataset {
  FeatureMatrix data;
};

struct aoc_model {
  AutoencoderModel model;
  std::optional<Optimizer> optimizer;
  std::optional<GaussianDecision> decision;
  DecisionMode mode;
};

struct aoc_stream_result {
  StreamResult result;
};

struct aoc_plan {
  AblationPlan plan;
};

struct aoc_ablation {
  AblationResults results;
};

namespace {

thread_local std::string g_last_error;

aoc_status status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return AOC_ERR_INVALID_ARGUMENT;
    case ErrorKind::Io: return AOC_ERR_IO;
    case ErrorKind::Parse: return AOC_ERR_PARSE;
    case ErrorKind::Shape: return AOC_ERR_SHAPE;
    case ErrorKind::State: return AOC_ERR_STATE;
    case ErrorKind::Internal: return AOC_ERR_INTERNAL;
  }
  return AOC_ERR_INTERNAL;
}

template <typename F>
aoc_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return AOC_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return AOC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AOC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return AOC_ERR_INTERNAL;
  }
}

aoc_status null_arg(const char* what) {
  g_last_error = std::string("null pointer: ") + what;
  return AOC_ERR_NULL_POINTER;
}

#define AOC_REQUIRE_PTR(p) \
  do {                     \
    if ((p) == nullptr) return null_arg(#p); \
  } while (0)

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

aoc_metrics to_c(const Evaluation& e) {
  aoc_metrics m{};
  m.accuracy = e.metrics.accuracy;
  m.precision = e.metrics.precision;
  m.recall = e.metrics.recall;
  m.f1 = e.metrics.f1;
  m.precision_undefined = e.metrics.precision_undefined ? 1 : 0;
  m.recall_undefined = e.metrics.recall_undefined ? 1 : 0;
  m.tp = e.confusion.tp;
  m.tn = e.confusion.tn;
  m.fp = e.confusion.fp;
  m.fn = e.confusion.fn;
  return m;
}

aoc_batch_record to_c(const BatchRecord& r) {
  aoc_batch_record out{};
  out.batch = r.batch;
  out.batch_size = r.batch_size;
  out.accepted = r.accepted;
  out.rejected = r.rejected;
  out.flipped = r.flipped;
  out.clean_pool = r.clean_pool;
  out.pseudo_pool = r.pseudo_pool;
  out.acceptance_rate = r.acceptance_rate;
  out.learning_rate = r.learning_rate;
  out.train_loss = r.train_loss;
  out.has_test = r.test ? 1 : 0;
  if (r.test) out.test = to_c(*r.test);
  return out;
}

aoc_cell_info to_c(const CellResult& c) {
  aoc_cell_info info{};
  info.run = c.run.c_str();
  info.seed = c.seed;
  info.ok = c.ok ? 1 : 0;
  if (c.ok) {
    info.param_count = c.result.param_count;
    info.batches = c.result.history.size();
    info.final_metrics = to_c(c.result.final);
  }
  return info;
}

void write_file(const char* path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, std::string("cannot write ") + path);
  out << text;
  require(static_cast<bool>(out), ErrorKind::Io, std::string("write failed: ") + path);
}

}  // namespace

extern "C" {

const char* aoc_version(void) { return "1.0.0"; }

const char* aoc_last_error(void) { return g_last_error.c_str(); }

const char* aoc_status_name(aoc_status status) {
  switch (status) {
    case AOC_OK: return "ok";
    case AOC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case AOC_ERR_IO: return "i/o error";
    case AOC_ERR_PARSE: return "parse error";
    case AOC_ERR_SHAPE: return "shape mismatch";
    case AOC_ERR_STATE: return "invalid state";
    case AOC_ERR_INTERNAL: return "internal error";
    case AOC_ERR_NULL_POINTER: return "null pointer";
  }
  return "unknown status";
}

void aoc_string_free(char* s) { std::free(s); }

// ---- configuration

aoc_status aoc_config_preset(const char* name, aoc_config** out) {
  AOC_REQUIRE_PTR(name);
  AOC_REQUIRE_PTR(out);
  return guarded([&] { *out = new aoc_config{preset_config(name)}; });
}

aoc_status aoc_config_load(const char* path, aoc_config** out) {
  AOC_REQUIRE_PTR(path);
  AOC_REQUIRE_PTR(out);
  return guarded([&] { *out = new aoc_config{load_config(path)}; });
}

aoc_status aoc_config_from_json(const char* text, aoc_config** out) {
  AOC_REQUIRE_PTR(text);
  AOC_REQUIRE_PTR(out);
  return guarded([&] { *out = new aoc_config{config_from_json(text, ExperimentConfig::base_replication())}; });
}

aoc_status aoc_config_patch(const aoc_config* base, const char* patch_json, aoc_config** out) {
  AOC_REQUIRE_PTR(base);
  AOC_REQUIRE_PTR(patch_json);
  AOC_REQUIRE_PTR(out);
  return guarded([&] {
    nlohmann::json patch;
    try {
      patch = nlohmann::json::parse(patch_json);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, std::string("config patch: ") + e.what());
    }
    require(!patch.is_object() || !patch.contains("preset"), ErrorKind::InvalidArgument,
            "config patch must not name a preset");
    *out = new aoc_config{config_from_json(patch_json, base->cfg)};
  });
}

aoc_status aoc_config_clone(const aoc_config* cfg, aoc_config** out) {
  AOC_REQUIRE_PTR(cfg);
  AOC_REQUIRE_PTR(out);
  return guarded([&] { *out = new aoc_config{cfg->cfg}; });
}

aoc_status aoc_config_to_json(const aoc_config* cfg, char** out_text) {
  AOC_REQUIRE_PTR(cfg);
  AOC_REQUIRE_PTR(out_text);
  return guarded([&] { *out_text = copy_string(config_to_json(cfg->cfg)); });
}

aoc_status aoc_config_save(const aoc_config* cfg, const char* path) {
  AOC_REQUIRE_PTR(cfg);
  AOC_REQUIRE_PTR(path);
  return guarded([&] { save_config(path, cfg->cfg); });
}

aoc_status aoc_config_set_seed(aoc_config* cfg, uint64_t seed) {
  AOC_REQUIRE_PTR(cfg);
  cfg->cfg.stream.seed = seed;
  return AOC_OK;
}

aoc_status aoc_config_set_name(aoc_config* cfg, const char* name) {
  AOC_REQUIRE_PTR(cfg);
  AOC_REQUIRE_PTR(name);
  return guarded([&] {
    require(*name != '\0', ErrorKind::InvalidArgument, "run name must not be empty");
    cfg->cfg.name = name;
  });
}

aoc_status aoc_config_name(const aoc_config* cfg, char** out_name) {
  AOC_REQUIRE_PTR(cfg);
  AOC_REQUIRE_PTR(out_name);
  return guarded([&] { *out_name = copy_string(cfg->cfg.name); });
}

void aoc_config_free(aoc_config* cfg) { delete cfg; }

aoc_status aoc_param_count(size_t input_dim, const size_t* hidden_dims, size_t n_hidden, int with_heads, size_t* out) {
  AOC_REQUIRE_PTR(out);
  if (n_hidden > 0) AOC_REQUIRE_PTR(hidden_dims);
  return guarded([&] {
    ArchitectureSpec spec;
    spec.input_dim = input_dim;
    spec.hidden_dims.assign(hidden_dims, hidden_dims + n_hidden);
    spec.with_heads = with_heads != 0;
    *out = count_parameters(AutoencoderModel::build(spec, 0));
  });
}

// ---- data

aoc_status aoc_data_load_pair(const char* train_csv, const char* test_csv, const char* preprocessor_path,
                              aoc_dataset** out_train, aoc_dataset** out_test) {
  AOC_REQUIRE_PTR(train_csv);
  AOC_REQUIRE_PTR(test_csv);
  AOC_REQUIRE_PTR(out_train);
  AOC_REQUIRE_PTR(out_test);
  return guarded([&] {
    LoadedData loaded = load_train_test(train_csv, test_csv);
    if (preprocessor_path != nullptr) loaded.preprocessor.save(preprocessor_path);
    auto* tr = new aoc_dataset{std::move(loaded.train)};
    auto* te = new (std::nothrow) aoc_dataset{std::move(loaded.test)};
    if (te == nullptr) {
      delete tr;
      throw std::bad_alloc();
    }
    *out_train = tr;
    *out_test = te;
  });
}

aoc_status aoc_data_from_arrays(const double* features, const double* labels, size_t rows, size_t cols,
                                aoc_dataset** out) {
  AOC_REQUIRE_PTR(out);
  if (rows * cols > 0) AOC_REQUIRE_PTR(features);
  return guarded([&] {
    require(cols > 0, ErrorKind::InvalidArgument, "dataset needs at least one column");
    FeatureMatrix fm;
    fm.data = Eigen::Map<const Matrix>(features, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    require(fm.data.allFinite(), ErrorKind::InvalidArgument, "features contain non-finite values");
    if (labels != nullptr) {
      Vector y = Eigen::Map<const Vector>(labels, static_cast<Eigen::Index>(rows));
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        require(y[i] == 0.0 || y[i] == 1.0, ErrorKind::InvalidArgument, "labels must be 0 or 1");
      }
      fm.labels = std::move(y);
    }
    *out = new aoc_dataset{std::move(fm)};
  });
}

aoc_status aoc_data_synthetic(size_t n_normal, size_t n_attack, size_t dim, double separation, uint64_t seed,
                              aoc_dataset** out) {
  AOC_REQUIRE_PTR(out);
  return guarded([&] { *out = new aoc_dataset{generate_synthetic(n_normal, n_attack, dim, separation, seed)}; });
}

aoc_status aoc_data_shape(const aoc_dataset* data, size_t* rows, size_t* cols) {
  AOC_REQUIRE_PTR(data);
  if (rows != nullptr) *rows = data->data.rows();
  if (cols != nullptr) *cols = data->data.cols();
  return AOC_OK;
}

aoc_status aoc_data_write_csv(const aoc_dataset* data, const char* path) {
  AOC_REQUIRE_PTR(data);
  AOC_REQUIRE_PTR(path);
  return guarded([&] { write_feature_csv(path, data->data); });
}

void aoc_data_free(aoc_dataset* data) { delete data; }

// ---- model

aoc_status aoc_model_train(const aoc_config* cfg, const aoc_dataset* train, aoc_model** out) {
  AOC_REQUIRE_PTR(cfg);
  AOC_REQUIRE_PTR(train);
  AOC_REQUIRE_PTR(out);
  return guarded([&] {
    Learner learner = train_initial_only(train->data, cfg->cfg);
    *out = new aoc_model{std::move(learner.model), std::move(learner.optimizer), std::move(learner.decision),
                         cfg->cfg.stream.decision_mode};
  });
}

aoc_status aoc_model_save(const aoc_model* model, const char* path) {
  AOC_REQUIRE_PTR(model);
  AOC_REQUIRE_PTR(path);
  return guarded([&] {
    save_checkpoint(path, model->model, model->optimizer ? &*model->optimizer : nullptr,
                    model->decision ? &*model->decision : nullptr);
  });
}

aoc_status aoc_model_load(const char* path, aoc_model** out) {
  AOC_REQUIRE_PTR(path);
  AOC_REQUIRE_PTR(out);
  return guarded([&] {
    Checkpoint ck = load_checkpoint(path);
    const DecisionMode mode = ck.decision ? DecisionMode::Gaussian : DecisionMode::Heads;
    require(mode == DecisionMode::Gaussian || ck.model.has_heads(), ErrorKind::State,
            "checkpoint has neither a fitted decision nor classifier heads");
    *out = new aoc_model{std::move(ck.model), std::move(ck.optimizer), std::move(ck.decision), mode};
  });
}

aoc_status aoc_model_param_count(const aoc_model* model, size_t* out) {
  AOC_REQUIRE_PTR(model);
  AOC_REQUIRE_PTR(out);
  *out = model->model.param_count();
  return AOC_OK;
}

aoc_status aoc_model_predict(aoc_model* model, const aoc_dataset* data, int* labels, double* confidence, size_t n) {
  AOC_REQUIRE_PTR(model);
  AOC_REQUIRE_PTR(data);
  AOC_REQUIRE_PTR(labels);
  return guarded([&] {
    require(n == data->data.rows(), ErrorKind::Shape, "output length does not match the row count");
    const auto verdicts =
        predict(model->model, model->decision ? &*model->decision : nullptr, model->mode, data->data.data);
    for (size_t i = 0; i < n; ++i) {
      labels[i] = verdicts[i].label;
      if (confidence != nullptr) confidence[i] = verdicts[i].confidence;
    }
  });
}

aoc_status aoc_model_evaluate(aoc_model* model, const aoc_dataset* data, aoc_metrics* out) {
  AOC_REQUIRE_PTR(model);
  AOC_REQUIRE_PTR(data);
  AOC_REQUIRE_PTR(out);
  return guarded([&] {
    require(data->data.labels.has_value(), ErrorKind::InvalidArgument, "evaluation data has no labels");
    const std::vector<int> pred = verdict_labels(
        predict(model->model, model->decision ? &*model->decision : nullptr, model->mode, data->data.data));
    std::vector<int> truth(pred.size());
    for (size_t i = 0; i < truth.size(); ++i) {
      truth[i] = (*data->data.labels)[static_cast<Eigen::Index>(i)] >= 0.5 ? 1 : 0;
    }
    *out = to_c(compute_metrics(pred, truth));
  });
}

void aoc_model_free(aoc_model* model) { delete model; }

// ---- streaming

aoc_status aoc_stream_run(const aoc_config* cfg, const aoc_dataset* train, const aoc_dataset* test,
                          size_t max_batches, aoc_batch_callback callback, void* user, aoc_stream_result** out) {
  AOC_REQUIRE_PTR(cfg);
  AOC_REQUIRE_PTR(train);
  AOC_REQUIRE_PTR(test);
  AOC_REQUIRE_PTR(out);
  return guarded([&] {
    ProgressFn progress;
    if (callback != nullptr) {
      progress = [&](const BatchRecord& r) {
        const aoc_batch_record rec = to_c(r);
        callback(&rec, user);
      };
    }
    *out = new aoc_stream_result{run_stream(train->data, test->data, cfg->cfg, max_batches, progress)};
  });
}

aoc_status aoc_stream_param_count(const aoc_stream_result* r, size_t* out) {
  AOC_REQUIRE_PTR(r);
  AOC_REQUIRE_PTR(out);
  *out = r->result.param_count;
  return AOC_OK;
}

aoc_status aoc_stream_initial_size(const aoc_stream_result* r, size_t* out) {
  AOC_REQUIRE_PTR(r);
  AOC_REQUIRE_PTR(out);
  *out = r->result.initial_size;
  return AOC_OK;
}

aoc_status aoc_stream_initial_metrics(const aoc_stream_result* r, aoc_metrics* out) {
  AOC_REQUIRE_PTR(r);
  AOC_REQUIRE_PTR(out);
  *out = to_c(r->result.initial);
  return AOC_OK;
}

aoc_status aoc_stream_final_metrics(const aoc_stream_result* r, aoc_metrics* out) {
  AOC_REQUIRE_PTR(r);
  AOC_REQUIRE_PTR(out);
  *out = to_c(r->result.final);
  return AOC_OK;
}

aoc_status aoc_stream_batch_count(const aoc_stream_result* r, size_t* out) {
  AOC_REQUIRE_PTR(r);
  AOC_REQUIRE_PTR(out);
  *out = r->result.history.size();
  return AOC_OK;
}

aoc_status aoc_stream_batch(const aoc_stream_result* r, size_t index, aoc_batch_record* out) {
  AOC_REQUIRE_PTR(r);
  AOC_REQUIRE_PTR(out);
  return guarded([&] {
    require(index < r->result.history.size(), ErrorKind::InvalidArgument, "batch index out of range");
    *out = to_c(r->result.history[index]);
  });
}

aoc_status aoc_stream_history_jsonl(const aoc_stream_result* r, char** out_text) {
  AOC_REQUIRE_PTR(r);
  AOC_REQUIRE_PTR(out_text);
  return guarded([&] { *out_text = copy_string(history_to_jsonl(r->result.history)); });
}

aoc_status aoc_stream_write_history(const aoc_stream_result* r, const char* path) {
  AOC_REQUIRE_PTR(r);
  AOC_REQUIRE_PTR(path);
  return guarded([&] { write_file(path, history_to_jsonl(r->result.history)); });
}

aoc_status aoc_stream_to_ablation(const aoc_stream_result* r, aoc_ablation** out) {
  AOC_REQUIRE_PTR(r);
  AOC_REQUIRE_PTR(out);
  return guarded([&] {
    AblationResults res;
    res.runs = {r->result.name};
    res.seeds = {r->result.seed};
    res.cells.push_back(CellResult{r->result.name, r->result.seed, true, {}, r->result});
    *out = new aoc_ablation{std::move(res)};
  });
}

void aoc_stream_free(aoc_stream_result* r) { delete r; }

// ---- ablation

aoc_status aoc_plan_create(aoc_plan** out) {
  AOC_REQUIRE_PTR(out);
  return guarded([&] { *out = new aoc_plan{}; });
}

aoc_status aoc_plan_standard(aoc_plan** out) {
  AOC_REQUIRE_PTR(out);
  return guarded([&] { *out = new aoc_plan{AblationPlan::standard()}; });
}

aoc_status aoc_plan_add_run(aoc_plan* plan, const aoc_config* cfg) {
  AOC_REQUIRE_PTR(plan);
  AOC_REQUIRE_PTR(cfg);
  return guarded([&] {
    cfg->cfg.validate();
    plan->plan.runs.push_back(cfg->cfg);
  });
}

aoc_status aoc_plan_set_seeds(aoc_plan* plan, const uint64_t* seeds, size_t n) {
  AOC_REQUIRE_PTR(plan);
  if (n > 0) AOC_REQUIRE_PTR(seeds);
  return guarded([&] {
    require(n > 0, ErrorKind::InvalidArgument, "at least one seed is required");
    plan->plan.seeds.assign(seeds, seeds + n);
  });
}

aoc_status aoc_plan_set_max_batches(aoc_plan* plan, size_t max_batches) {
  AOC_REQUIRE_PTR(plan);
  plan->plan.max_batches = max_batches;
  return AOC_OK;
}

void aoc_plan_free(aoc_plan* plan) { delete plan; }

aoc_status aoc_ablation_run(const aoc_plan* plan, const aoc_dataset* train, const aoc_dataset* test, unsigned threads,
                            aoc_cell_callback callback, void* user, aoc_ablation** out) {
  AOC_REQUIRE_PTR(plan);
  AOC_REQUIRE_PTR(train);
  AOC_REQUIRE_PTR(test);
  AOC_REQUIRE_PTR(out);
  return guarded([&] {
    CellProgressFn progress;
    if (callback != nullptr) {
      progress = [&](const CellResult& c) {
        const aoc_cell_info info = to_c(c);
        callback(&info, user);
      };
    }
    *out = new aoc_ablation{run_ablation(plan->plan, train->data, test->data, threads, progress)};
  });
}

aoc_status aoc_ablation_load(const char* path, aoc_ablation** out) {
  AOC_REQUIRE_PTR(path);
  AOC_REQUIRE_PTR(out);
  return guarded([&] { *out = new aoc_ablation{load_results(path)}; });
}

aoc_status aoc_ablation_save(const aoc_ablation* a, const char* path) {
  AOC_REQUIRE_PTR(a);
  AOC_REQUIRE_PTR(path);
  return guarded([&] { save_results(path, a->results); });
}

aoc_status aoc_ablation_cell_count(const aoc_ablation* a, size_t* out) {
  AOC_REQUIRE_PTR(a);
  AOC_REQUIRE_PTR(out);
  *out = a->results.cells.size();
  return AOC_OK;
}

aoc_status aoc_ablation_cell(const aoc_ablation* a, size_t index, aoc_cell_info* out) {
  AOC_REQUIRE_PTR(a);
  AOC_REQUIRE_PTR(out);
  return guarded([&] {
    require(index < a->results.cells.size(), ErrorKind::InvalidArgument, "cell index out of range");
    *out = to_c(a->results.cells[index]);
  });
}

aoc_status aoc_ablation_render_table(const aoc_ablation* a, char** out_text) {
  AOC_REQUIRE_PTR(a);
  AOC_REQUIRE_PTR(out_text);
  return guarded([&] { *out_text = copy_string(render_table(a->results)); });
}

aoc_status aoc_ablation_emit_report(const aoc_ablation* a, const char* out_dir, aoc_report_format format) {
  AOC_REQUIRE_PTR(a);
  AOC_REQUIRE_PTR(out_dir);
  return guarded([&] {
    ReportFormat f = ReportFormat::All;
    switch (format) {
      case AOC_REPORT_TABLE: f = ReportFormat::Table; break;
      case AOC_REPORT_PLOTDATA: f = ReportFormat::Plotdata; break;
      case AOC_REPORT_ALL: f = ReportFormat::All; break;
      default: fail(ErrorKind::InvalidArgument, "unknown report format");
    }
    emit_report(a->results, out_dir, f);
  });
}

void aoc_ablation_free(aoc_ablation* a) { delete a; }

// ---- export

aoc_status aoc_export_boost(const char* train_csv, const char* test_csv, const char* out_dir, uint64_t seed,
                            double valid_fraction, aoc_boost_summary* out) {
  AOC_REQUIRE_PTR(train_csv);
  AOC_REQUIRE_PTR(test_csv);
  AOC_REQUIRE_PTR(out_dir);
  return guarded([&] {
    const BoostExportSummary s = export_boost_data(train_csv, test_csv, out_dir, seed, valid_fraction);
    if (out != nullptr) {
      out->train_rows = s.train_rows;
      out->valid_rows = s.valid_rows;
      out->test_rows = s.test_rows;
      out->feature_count = s.feature_count;
      out->warning_count = s.warnings.size();
    }
  });
}

}  // extern "C"
