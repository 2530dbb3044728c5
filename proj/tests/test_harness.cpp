#include "core/error.hpp"
#include "core/harness.hpp"
#include "core/metrics.hpp"
#include "support.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <sstream>

using namespace aocids;
using namespace testsupport;

namespace {

std::vector<int> expand(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn, std::vector<int>& truth) {
  std::vector<int> pred;
  truth.clear();
  auto push = [&](std::uint64_t n, int p, int t) {
    for (std::uint64_t i = 0; i < n; ++i) {
      pred.push_back(p);
      truth.push_back(t);
    }
  };
  push(tp, 1, 1);
  push(tn, 0, 0);
  push(fp, 1, 0);
  push(fn, 0, 1);
  return pred;
}

ExperimentConfig tiny(const std::string& preset) {
  ExperimentConfig c = preset_config(preset);
  c.arch.hidden_dims = c.arch.with_heads ? std::vector<std::size_t>{8, 4} : std::vector<std::size_t>{12, 6};
  c.stream.epoch0 = 2;
  c.stream.epoch1 = 1;
  c.stream.stream_batch_size = 60;
  return c;
}

struct Fixture {
  FeatureMatrix train = generate_synthetic(100, 100, 6, 4.0, 1);
  FeatureMatrix test = generate_synthetic(50, 50, 6, 4.0, 2);

  AblationPlan plan() const {
    AblationPlan p;
    p.runs = {tiny("base"), tiny("imp234")};
    p.seeds = {0, 1, 2};
    return p;
  }
};

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("perfect predictions") {
    const std::vector<int> y = {1, 0};
    const Evaluation e = compute_metrics(y, y);
    CHECK(e.metrics.accuracy == 100.0);
    CHECK(e.metrics.precision == 100.0);
    CHECK(e.metrics.recall == 100.0);
    CHECK(e.metrics.f1 == 100.0);
    CHECK(e.confusion.tp == 1);
    CHECK(e.confusion.tn == 1);
  }

  TEST_CASE("published confusion counts") {
    std::vector<int> truth;
    const std::vector<int> pred = expand(31617, 17560, 1040, 1318, truth);
    const Evaluation e = compute_metrics(pred, truth);
    CHECK(e.confusion.total() == 51535);
    CHECK(std::round(e.metrics.accuracy * 100.0) / 100.0 == 95.42);
    CHECK(e.metrics.accuracy == doctest::Approx(100.0 * 49177.0 / 51535.0).epsilon(1e-12));
  }

  TEST_CASE("degenerate all-normal predictor") {
    const std::vector<int> truth = {1, 0, 1, 0};
    const std::vector<int> pred(4, 0);
    const Evaluation e = compute_metrics(pred, truth);
    CHECK(e.metrics.recall == 0.0);
    CHECK(e.metrics.precision == 0.0);
    CHECK(e.metrics.precision_undefined);
    CHECK_FALSE(e.metrics.recall_undefined);
    CHECK(e.metrics.f1 == 0.0);
    CHECK(e.metrics.accuracy == 50.0);
  }

  TEST_CASE("property: accuracy and F1 identities") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> count(0, 200);
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<int> truth;
      const std::vector<int> pred = expand(count(rng), count(rng), count(rng), count(rng) + 1, truth);
      const Evaluation e = compute_metrics(pred, truth);
      const ConfusionMatrix& c = e.confusion;
      CHECK(c.total() == pred.size());
      CHECK(e.metrics.accuracy == 100.0 * static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total()));
      for (double m : {e.metrics.accuracy, e.metrics.precision, e.metrics.recall, e.metrics.f1}) {
        CHECK(m >= 0.0);
        CHECK(m <= 100.0);
      }
      const double p = e.metrics.precision;
      const double r = e.metrics.recall;
      if (!e.metrics.precision_undefined && p + r > 0.0) CHECK(std::abs(e.metrics.f1 - 2 * p * r / (p + r)) <= 1e-12);
      const MetricSet again = metrics_from_confusion(c);
      CHECK(again.f1 == e.metrics.f1);
    }
  }

  TEST_CASE("length mismatch and empty input are errors") {
    const std::vector<int> a = {1, 0};
    const std::vector<int> b = {1};
    CHECK_THROWS_AS(compute_metrics(a, b), Error);
    CHECK_THROWS_AS(compute_metrics(std::vector<int>{}, std::vector<int>{}), Error);
  }
}

TEST_SUITE("quoted figures") {
  TEST_CASE("comparison rows") {
    const auto& rows = quoted_baselines();
    REQUIRE(rows.size() == 5);
    const std::vector<std::pair<std::string, double>> expected = {
        {"DTC (Online)", 85.95}, {"RF (Online)", 85.93}, {"XGBoost (Online)", 86.97}, {"FeCo", 72.50}, {"CIDS", 82.61}};
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(std::string(rows[i].method) == expected[i].first);
      CHECK(*rows[i].accuracy == expected[i].second);
    }
    CHECK(*quoted_boost().accuracy == 95.45);
    CHECK(*quoted_boost().f1 == 95.29);
    CHECK(*quoted_replication().accuracy == 89.39);
    CHECK(*quoted_published_base().accuracy == 89.19);
  }

  TEST_CASE("ablation references and parameter counts") {
    CHECK(*reference_for_run("imp234")->accuracy == 90.88);
    CHECK(*reference_for_run("imp234")->params == 29830);
    CHECK(*reference_for_run("imp2")->params == 67202);
    CHECK(*reference_for_run("imp24")->params == 29830);
    CHECK(*reference_for_run("base")->accuracy == 89.39);
    CHECK_FALSE(reference_for_run("imp3")->precision.has_value());
    CHECK_FALSE(reference_for_run("unknown").has_value());
  }

  TEST_CASE("standard plan") {
    const AblationPlan p = AblationPlan::standard();
    std::vector<std::string> names;
    for (const auto& r : p.runs) names.push_back(r.name);
    CHECK(names == std::vector<std::string>{"base", "imp2", "imp3", "imp4", "imp23", "imp24", "imp234"});
    CHECK(p.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
    for (const auto& r : p.runs) {
      ArchitectureSpec a = r.arch;
      a.input_dim = 194;
      const std::size_t count = AutoencoderModel::build(a, 0).param_count();
      if (r.name == "base") {
        CHECK(count == 67202);
      } else if (r.name.find('4') != std::string::npos) {
        CHECK(count == 29830);
      } else {
        // Full-size architecture plus the two heads.
        CHECK(count == 67462);
      }
    }
  }

  TEST_CASE("empty plans and duplicate names are invalid") {
    AblationPlan p;
    CHECK_THROWS_AS(p.validate(), Error);
    p.runs = {tiny("base"), tiny("base")};
    CHECK_THROWS_AS(p.validate(), Error);
    p.runs = {tiny("base")};
    p.seeds.clear();
    CHECK_THROWS_AS(p.validate(), Error);
  }
}

TEST_SUITE("ablation") {
  TEST_CASE("every cell runs, best is at least the mean, thread count does not matter") {
    Fixture f;
    const AblationResults one = run_ablation(f.plan(), f.train, f.test, 1);
    const AblationResults two = run_ablation(f.plan(), f.train, f.test, 2);
    REQUIRE(one.cells.size() == 6);
    CHECK(results_to_json(one) == results_to_json(two));
    for (const auto& c : one.cells) CHECK(c.ok);
    CHECK(one.cells[0].run == "base");
    CHECK(one.cells[3].run == "imp234");
    CHECK(one.cells[4].seed == 1);

    for (const RunSummary& s : summarize(one)) {
      CHECK(s.seeds_ok == 3);
      REQUIRE(s.best_seed.has_value());
      CHECK(s.best.metrics.accuracy >= s.mean_accuracy - 1e-12);
      for (const auto& c : one.cells) {
        if (c.run == s.run) CHECK(c.result.final.metrics.accuracy <= s.best.metrics.accuracy);
      }
    }
  }

  TEST_CASE("a failing cell is recorded and the others continue") {
    Fixture f;
    AblationPlan p = f.plan();
    p.runs[0].arch.input_dim = 9;
    p.seeds = {0, 1};
    const AblationResults r = run_ablation(p, f.train, f.test);
    REQUIRE(r.cells.size() == 4);
    CHECK_FALSE(r.cells[0].ok);
    CHECK(r.cells[0].error.find("input_dim") != std::string::npos);
    CHECK(r.cells[2].ok);
    const auto summaries = summarize(r);
    CHECK(summaries[0].seeds_failed == 2);
    CHECK_FALSE(summaries[0].best_seed.has_value());
    const std::string table = render_table(r);
    CHECK(table.find("base") != std::string::npos);
  }

  TEST_CASE("best selection ordering") {
    CellResult a, b, c;
    a.ok = b.ok = c.ok = true;
    a.result.final.metrics = {90.0, 0, 0, 80.0};
    b.result.final.metrics = {90.0, 0, 0, 85.0};
    c.result.final.metrics = {90.0, 0, 0, 85.0};
    CHECK(select_best({&a, &b, &c}) == 1u);
    c.result.final.metrics.accuracy = 91.0;
    CHECK(select_best({&a, &b, &c}) == 2u);
    c.ok = false;
    CHECK(select_best({&a, &b, &c}) == 1u);
    CHECK_FALSE(select_best({}).has_value());
  }
}

TEST_SUITE("reports") {
  TEST_CASE("results round-trip and re-emission is byte-identical") {
    Fixture f;
    TempDir dir;
    const AblationResults r = run_ablation(f.plan(), f.train, f.test);
    save_results(dir.file("results.json"), r);
    const AblationResults loaded = load_results(dir.file("results.json"));
    CHECK(results_to_json(loaded) == results_to_json(r));
    CHECK(render_table(loaded) == render_table(r));
    CHECK(render_plotdata(loaded) == render_plotdata(r));

    const auto first = emit_report(r, dir.file("a"));
    const auto second = emit_report(loaded, dir.file("b"));
    REQUIRE(first.size() == 3);
    REQUIRE(second.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(first[i].filename() == second[i].filename());
      CHECK(read_file(first[i]) == read_file(second[i]));
    }
  }

  TEST_CASE("table contents") {
    Fixture f;
    const AblationResults r = run_ablation(f.plan(), f.train, f.test);
    const std::string table = render_table(r);
    for (const char* needle : {"85.95", "85.93", "86.97", "72.50", "82.61", "95.45", "89.39", "90.88", "DTC", "CIDS",
                               "FeCo", "67,462", "Method"}) {
      CHECK_MESSAGE(table.find(needle) != std::string::npos, needle);
    }
    const auto j = nlohmann::json::parse(render_report_json(r));
    CHECK(j.dump().find("85.95") != std::string::npos);
  }

  TEST_CASE("plot data has one row per stream batch of each run") {
    Fixture f;
    const AblationResults r = run_ablation(f.plan(), f.train, f.test);
    const std::string csv = render_plotdata(r);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("run,seed,batch,", 0) == 0);
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    // 160 stream samples in batches of 60 gives 3 batches, for each of the 2 runs.
    CHECK(r.cells[0].result.history.size() == 3);
    CHECK(rows == 6);
  }

  TEST_CASE("selective formats and unwritable destinations") {
    Fixture f;
    TempDir dir;
    AblationPlan p = f.plan();
    p.seeds = {0};
    const AblationResults r = run_ablation(p, f.train, f.test);
    const auto table = emit_report(r, dir.file("t"), ReportFormat::Table);
    CHECK(table.size() == 2);
    const auto plot = emit_report(r, dir.file("p"), ReportFormat::Plotdata);
    REQUIRE(plot.size() == 1);
    CHECK(plot[0].filename() == "plotdata.csv");
    dir.write("blocker", "x");
    CHECK_THROWS_AS(emit_report(r, dir.file("blocker") / "sub"), Error);
  }

  TEST_CASE("malformed results files are parse errors") {
    CHECK_THROWS_AS(results_from_json("{}"), Error);
    CHECK_THROWS_AS(results_from_json("[1,2"), Error);
  }
}

TEST_SUITE("boost export") {
  TEST_CASE("numeric csv pair with label strata") {
    TempDir dir;
    const FeatureMatrix train = generate_synthetic(80, 40, 3, 2.0, 1);
    const FeatureMatrix test = generate_synthetic(20, 20, 3, 2.0, 2);
    write_feature_csv(dir.file("train.csv"), train);
    write_feature_csv(dir.file("test.csv"), test);
    const BoostExportSummary s =
        export_boost_data(dir.file("train.csv"), dir.file("test.csv"), dir.file("out"), 3, 0.2, "attack_cat");
    CHECK(s.train_rows == 96);
    CHECK(s.valid_rows == 24);
    CHECK(s.test_rows == 40);
    CHECK(s.feature_count == 3);
    for (const char* name : {"boost_train.csv", "boost_valid.csv", "boost_test.csv", "boost_train_weights.csv",
                             "preprocessor.json", "manifest.json"}) {
      CHECK_MESSAGE(std::filesystem::exists(dir.file("out") / name), name);
    }
    const std::string weights = read_file(dir.file("out") / "boost_train_weights.csv");
    std::istringstream in(weights);
    std::string line;
    std::getline(in, line);
    double sum_attack = 0, sum_normal = 0;
    const std::string rows = read_file(dir.file("out") / "boost_train.csv");
    std::istringstream rin(rows);
    std::string row;
    std::getline(rin, row);
    while (std::getline(in, line) && std::getline(rin, row)) {
      const double w = std::stod(line);
      (row.back() == '1' ? sum_attack : sum_normal) += w;
    }
    CHECK(sum_attack == doctest::Approx(sum_normal));

    const BoostExportSummary again =
        export_boost_data(dir.file("train.csv"), dir.file("test.csv"), dir.file("out2"), 3, 0.2, "attack_cat");
    CHECK(read_file(dir.file("out") / "boost_valid.csv") == read_file(dir.file("out2") / "boost_valid.csv"));
  }

  TEST_CASE("missing input is an io error") {
    TempDir dir;
    try {
      export_boost_data(dir.file("none.csv"), dir.file("none2.csv"), dir.file("out"), 0);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Io);
    }
  }
}
