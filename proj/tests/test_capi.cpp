#include <aocids/aocids.h>

#include "tempdir.hpp"

#include <doctest.h>

#include <cstring>
#include <string>
#include <vector>

extern "C" int aoc_c_smoke(void);

using testsupport::TempDir;
using testsupport::read_file;

namespace {

std::string take(char* s) {
  std::string out = s != nullptr ? s : "";
  aoc_string_free(s);
  return out;
}

aoc_config* tiny_config(const char* preset) {
  aoc_config* base = nullptr;
  REQUIRE(aoc_config_preset(preset, &base) == AOC_OK);
  aoc_config* out = nullptr;
  const char* patch = R"({"architecture":{"hidden_dims":[12,6]},"stream":{"epoch0":2,"epoch1":1,"stream_batch_size":60}})";
  REQUIRE(aoc_config_patch(base, patch, &out) == AOC_OK);
  aoc_config_free(base);
  return out;
}

struct Data {
  aoc_dataset* train = nullptr;
  aoc_dataset* test = nullptr;
  Data() {
    REQUIRE(aoc_data_synthetic(100, 100, 6, 4.0, 1, &train) == AOC_OK);
    REQUIRE(aoc_data_synthetic(50, 50, 6, 4.0, 2, &test) == AOC_OK);
  }
  ~Data() {
    aoc_data_free(train);
    aoc_data_free(test);
  }
};

void count_batches(const aoc_batch_record*, void* user) { ++*static_cast<int*>(user); }

}  // namespace

TEST_SUITE("c api") {
  TEST_CASE("header is usable from C") { CHECK(aoc_c_smoke() == 21); }

  TEST_CASE("version and status names") {
    CHECK(std::string(aoc_version()) == "1.0.0");
    CHECK(std::string(aoc_status_name(AOC_OK)) == "ok");
    CHECK(std::string(aoc_status_name(AOC_ERR_IO)) == "i/o error");
    CHECK(std::string(aoc_status_name(static_cast<aoc_status>(99))) == "unknown status");
  }

  TEST_CASE("reference parameter counts") {
    const size_t lite[2] = {64, 32};
    const size_t base[2] = {128, 64};
    size_t n = 0;
    REQUIRE(aoc_param_count(194, lite, 2, 1, &n) == AOC_OK);
    CHECK(n == 29830);
    REQUIRE(aoc_param_count(194, base, 2, 0, &n) == AOC_OK);
    CHECK(n == 67202);
    CHECK(aoc_param_count(0, base, 2, 0, &n) == AOC_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(aoc_last_error()) > 0);
  }

  TEST_CASE("null pointers and bad names are reported, not crashed on") {
    aoc_config* cfg = nullptr;
    CHECK(aoc_config_preset(nullptr, &cfg) == AOC_ERR_NULL_POINTER);
    CHECK(aoc_config_preset("base", nullptr) == AOC_ERR_NULL_POINTER);
    CHECK(aoc_config_preset("nope", &cfg) == AOC_ERR_INVALID_ARGUMENT);
    CHECK(cfg == nullptr);
    CHECK(aoc_config_from_json("{\"bogus\":1}", &cfg) != AOC_OK);
    CHECK(aoc_config_from_json("{", &cfg) == AOC_ERR_PARSE);
    size_t rows = 0;
    CHECK(aoc_data_shape(nullptr, &rows, &rows) == AOC_ERR_NULL_POINTER);
    aoc_config_free(nullptr);
    aoc_data_free(nullptr);
    aoc_model_free(nullptr);
    aoc_stream_free(nullptr);
    aoc_plan_free(nullptr);
    aoc_ablation_free(nullptr);
    aoc_string_free(nullptr);
  }

  TEST_CASE("config json, patch, clone, save and load") {
    TempDir dir;
    aoc_config* cfg = nullptr;
    REQUIRE(aoc_config_preset("imp234", &cfg) == AOC_OK);
    char* text = nullptr;
    REQUIRE(aoc_config_to_json(cfg, &text) == AOC_OK);
    const std::string json = take(text);
    CHECK(json.find("\"imp234\"") != std::string::npos);

    aoc_config* copy = nullptr;
    REQUIRE(aoc_config_from_json(json.c_str(), &copy) == AOC_OK);
    REQUIRE(aoc_config_to_json(copy, &text) == AOC_OK);
    CHECK(take(text) == json);

    REQUIRE(aoc_config_set_seed(copy, 9) == AOC_OK);
    REQUIRE(aoc_config_set_name(copy, "mine") == AOC_OK);
    char* name = nullptr;
    REQUIRE(aoc_config_name(copy, &name) == AOC_OK);
    CHECK(take(name) == "mine");

    aoc_config* cloned = nullptr;
    REQUIRE(aoc_config_clone(copy, &cloned) == AOC_OK);
    const std::string path = dir.file("c.json").string();
    REQUIRE(aoc_config_save(cloned, path.c_str()) == AOC_OK);
    aoc_config* loaded = nullptr;
    REQUIRE(aoc_config_load(path.c_str(), &loaded) == AOC_OK);
    REQUIRE(aoc_config_to_json(loaded, &text) == AOC_OK);
    const std::string reloaded = take(text);
    CHECK(reloaded.find("\"mine\"") != std::string::npos);
    CHECK(reloaded.find("\"seed\": 9") != std::string::npos);

    aoc_config* patched = nullptr;
    CHECK(aoc_config_patch(cfg, R"({"preset":"base"})", &patched) == AOC_ERR_INVALID_ARGUMENT);
    CHECK(aoc_config_load(dir.file("missing.json").string().c_str(), &patched) == AOC_ERR_IO);

    for (aoc_config* c : {cfg, copy, cloned, loaded}) aoc_config_free(c);
  }

  TEST_CASE("arrays, shapes and csv export") {
    TempDir dir;
    const double features[6] = {0, 1, 2, 3, 4, 5};
    const double labels[3] = {0, 1, 0};
    aoc_dataset* d = nullptr;
    REQUIRE(aoc_data_from_arrays(features, labels, 3, 2, &d) == AOC_OK);
    size_t rows = 0, cols = 0;
    REQUIRE(aoc_data_shape(d, &rows, &cols) == AOC_OK);
    CHECK(rows == 3);
    CHECK(cols == 2);
    const std::string path = dir.file("d.csv").string();
    REQUIRE(aoc_data_write_csv(d, path.c_str()) == AOC_OK);
    CHECK(read_file(path) == "f0,f1,label\n0,1,0\n2,3,1\n4,5,0\n");
    aoc_data_free(d);

    const double bad_labels[3] = {0, 2, 0};
    CHECK(aoc_data_from_arrays(features, bad_labels, 3, 2, &d) == AOC_ERR_INVALID_ARGUMENT);
  }

  TEST_CASE("csv pair loading writes the preprocessor") {
    TempDir dir;
    Data data;
    const std::string train = dir.file("train.csv").string();
    const std::string test = dir.file("test.csv").string();
    REQUIRE(aoc_data_write_csv(data.train, train.c_str()) == AOC_OK);
    REQUIRE(aoc_data_write_csv(data.test, test.c_str()) == AOC_OK);
    aoc_dataset* a = nullptr;
    aoc_dataset* b = nullptr;
    const std::string pre = dir.file("pre.json").string();
    REQUIRE(aoc_data_load_pair(train.c_str(), test.c_str(), pre.c_str(), &a, &b) == AOC_OK);
    size_t rows = 0, cols = 0;
    REQUIRE(aoc_data_shape(b, &rows, &cols) == AOC_OK);
    CHECK(rows == 100);
    CHECK(cols == 6);
    CHECK(read_file(pre).find("aocids-preprocessor") != std::string::npos);
    aoc_data_free(a);
    aoc_data_free(b);
  }

  TEST_CASE("train, predict, evaluate and checkpoint round-trip") {
    TempDir dir;
    Data data;
    aoc_config* cfg = tiny_config("base");
    aoc_model* model = nullptr;
    REQUIRE(aoc_model_train(cfg, data.train, &model) == AOC_OK);
    size_t params = 0;
    REQUIRE(aoc_model_param_count(model, &params) == AOC_OK);
    CHECK(params == 6 * 12 + 36 + 12 * 6 + 18 + 6 * 12 + 36 + 12 * 6 + 6);

    std::vector<int> labels(100);
    std::vector<double> conf(100);
    REQUIRE(aoc_model_predict(model, data.test, labels.data(), conf.data(), labels.size()) == AOC_OK);
    for (double c : conf) CHECK(c >= 0.5);
    CHECK(aoc_model_predict(model, data.test, labels.data(), nullptr, 99) == AOC_ERR_SHAPE);

    aoc_metrics m{};
    REQUIRE(aoc_model_evaluate(model, data.test, &m) == AOC_OK);
    CHECK(m.tp + m.tn + m.fp + m.fn == 100);

    const std::string path = dir.file("m.ckpt").string();
    REQUIRE(aoc_model_save(model, path.c_str()) == AOC_OK);
    aoc_model* loaded = nullptr;
    REQUIRE(aoc_model_load(path.c_str(), &loaded) == AOC_OK);
    std::vector<int> again(100);
    REQUIRE(aoc_model_predict(loaded, data.test, again.data(), nullptr, again.size()) == AOC_OK);
    CHECK(again == labels);

    aoc_model_free(model);
    aoc_model_free(loaded);
    aoc_config_free(cfg);
  }

  TEST_CASE("stream run with callback, history and report") {
    TempDir dir;
    Data data;
    aoc_config* cfg = tiny_config("base");
    int seen = 0;
    aoc_stream_result* r = nullptr;
    REQUIRE(aoc_stream_run(cfg, data.train, data.test, 0, count_batches, &seen, &r) == AOC_OK);
    size_t batches = 0;
    REQUIRE(aoc_stream_batch_count(r, &batches) == AOC_OK);
    CHECK(batches == 3);
    CHECK(seen == 3);
    size_t initial = 0;
    REQUIRE(aoc_stream_initial_size(r, &initial) == AOC_OK);
    CHECK(initial == 40);

    aoc_batch_record rec{};
    REQUIRE(aoc_stream_batch(r, 2, &rec) == AOC_OK);
    CHECK(rec.batch == 3);
    CHECK(rec.batch_size == 40);
    CHECK(rec.has_test == 1);
    CHECK(aoc_stream_batch(r, 3, &rec) == AOC_ERR_INVALID_ARGUMENT);

    aoc_metrics fin{};
    REQUIRE(aoc_stream_final_metrics(r, &fin) == AOC_OK);
    CHECK(fin.accuracy == rec.test.accuracy);

    char* text = nullptr;
    REQUIRE(aoc_stream_history_jsonl(r, &text) == AOC_OK);
    const std::string jsonl = take(text);
    const std::string path = dir.file("h.jsonl").string();
    REQUIRE(aoc_stream_write_history(r, path.c_str()) == AOC_OK);
    CHECK(read_file(path) == jsonl);

    aoc_ablation* a = nullptr;
    REQUIRE(aoc_stream_to_ablation(r, &a) == AOC_OK);
    REQUIRE(aoc_ablation_emit_report(a, dir.file("rep").string().c_str(), AOC_REPORT_ALL) == AOC_OK);
    CHECK(std::filesystem::exists(dir.file("rep") / "report.txt"));
    CHECK(std::filesystem::exists(dir.file("rep") / "plotdata.csv"));

    aoc_ablation_free(a);
    aoc_stream_free(r);
    aoc_config_free(cfg);
  }

  TEST_CASE("ablation plan, run, save and load") {
    TempDir dir;
    Data data;
    aoc_plan* plan = nullptr;
    REQUIRE(aoc_plan_create(&plan) == AOC_OK);
    aoc_config* base = tiny_config("base");
    aoc_config* imp = tiny_config("imp2");
    REQUIRE(aoc_plan_add_run(plan, base) == AOC_OK);
    REQUIRE(aoc_plan_add_run(plan, imp) == AOC_OK);
    const uint64_t seeds[2] = {0, 1};
    REQUIRE(aoc_plan_set_seeds(plan, seeds, 2) == AOC_OK);
    REQUIRE(aoc_plan_set_max_batches(plan, 1) == AOC_OK);

    aoc_ablation* a = nullptr;
    REQUIRE(aoc_ablation_run(plan, data.train, data.test, 1, nullptr, nullptr, &a) == AOC_OK);
    size_t cells = 0;
    REQUIRE(aoc_ablation_cell_count(a, &cells) == AOC_OK);
    CHECK(cells == 4);
    aoc_cell_info info{};
    REQUIRE(aoc_ablation_cell(a, 3, &info) == AOC_OK);
    CHECK(std::string(info.run) == "imp2");
    CHECK(info.seed == 1);
    CHECK(info.ok == 1);
    CHECK(info.batches == 1);

    const std::string path = dir.file("r.json").string();
    REQUIRE(aoc_ablation_save(a, path.c_str()) == AOC_OK);
    aoc_ablation* loaded = nullptr;
    REQUIRE(aoc_ablation_load(path.c_str(), &loaded) == AOC_OK);
    char* t1 = nullptr;
    char* t2 = nullptr;
    REQUIRE(aoc_ablation_render_table(a, &t1) == AOC_OK);
    REQUIRE(aoc_ablation_render_table(loaded, &t2) == AOC_OK);
    CHECK(take(t1) == take(t2));

    aoc_plan* empty = nullptr;
    REQUIRE(aoc_plan_create(&empty) == AOC_OK);
    aoc_ablation* none = nullptr;
    CHECK(aoc_ablation_run(empty, data.train, data.test, 1, nullptr, nullptr, &none) == AOC_ERR_INVALID_ARGUMENT);

    aoc_plan* standard = nullptr;
    REQUIRE(aoc_plan_standard(&standard) == AOC_OK);

    aoc_ablation_free(a);
    aoc_ablation_free(loaded);
    aoc_plan_free(plan);
    aoc_plan_free(empty);
    aoc_plan_free(standard);
    aoc_config_free(base);
    aoc_config_free(imp);
  }

  TEST_CASE("boost export") {
    TempDir dir;
    Data data;
    const std::string train = dir.file("train.csv").string();
    const std::string test = dir.file("test.csv").string();
    REQUIRE(aoc_data_write_csv(data.train, train.c_str()) == AOC_OK);
    REQUIRE(aoc_data_write_csv(data.test, test.c_str()) == AOC_OK);
    aoc_boost_summary s{};
    REQUIRE(aoc_export_boost(train.c_str(), test.c_str(), dir.file("out").string().c_str(), 1, 0.2, &s) == AOC_OK);
    CHECK(s.train_rows == 160);
    CHECK(s.valid_rows == 40);
    CHECK(s.test_rows == 100);
    CHECK(aoc_export_boost(train.c_str(), test.c_str(), dir.file("out").string().c_str(), 1, 1.5, &s) ==
          AOC_ERR_INVALID_ARGUMENT);
  }
}
