#include "core/config.hpp"

#include "core/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace aocids {

using ojson = nlohmann::ordered_json;

const char* to_string(GateMode m) { return m == GateMode::Base ? "base" : "filtered"; }
const char* to_string(DecisionMode m) { return m == DecisionMode::Gaussian ? "gaussian" : "heads"; }
const char* to_string(Objective o) { return o == Objective::Crc ? "crc" : "improved"; }

namespace {

const char* to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }
const char* to_string(ScheduleKind k) { return k == ScheduleKind::Constant ? "constant" : "cosine"; }
const char* to_string(CrcDenominator d) { return d == CrcDenominator::Global ? "global" : "per_anchor"; }

template <typename Enum>
Enum parse_enum(const std::string& key, const std::string& value, std::initializer_list<std::pair<const char*, Enum>> options) {
  std::string allowed;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    allowed += allowed.empty() ? name : std::string("|") + name;
  }
  fail(ErrorKind::InvalidArgument, "config: " + key + " must be one of " + allowed + ", got '" + value + "'");
}

ojson to_ojson(const ExperimentConfig& c) {
  ojson j;
  j["name"] = c.name;
  ojson a;
  a["input_dim"] = c.arch.input_dim;
  a["hidden_dims"] = c.arch.hidden_dims;
  a["with_heads"] = c.arch.with_heads;
  a["batch_norm"] = c.arch.batch_norm;
  a["bn_epsilon"] = c.arch.bn_epsilon;
  a["bn_momentum"] = c.arch.bn_momentum;
  j["architecture"] = a;

  const TrainingConfig& t = c.training;
  ojson tr;
  tr["objective"] = to_string(t.objective);
  tr["crc_tau"] = t.crc.tau;
  tr["crc_denominator"] = to_string(t.crc.denominator);
  tr["lambda_enc"] = t.improved.lambda_enc;
  tr["recon_weight"] = t.improved.recon_weight;
  tr["optimizer"] = to_string(t.optimizer);
  tr["learning_rate"] = t.learning_rate;
  tr["weight_decay"] = t.weight_decay;
  tr["schedule"] = to_string(t.schedule);
  tr["eta_min"] = t.eta_min;
  tr["t_max"] = t.t_max;
  tr["batch_size"] = t.batch_size;
  j["training"] = tr;

  const StreamConfig& s = c.stream;
  ojson st;
  st["initial_fraction"] = s.initial_fraction;
  st["stream_batch_size"] = s.stream_batch_size;
  st["epoch0"] = s.epoch0;
  st["epoch1"] = s.epoch1;
  st["gate_mode"] = to_string(s.gate_mode);
  st["confidence_threshold"] = s.confidence_threshold;
  st["gate_requires_both_heads"] = s.gate_requires_both_heads;
  st["flip_fraction"] = s.flip_fraction;
  st["use_mixup"] = s.use_mixup;
  st["mixup_alpha"] = s.mixup_alpha;
  st["use_balanced_sampling"] = s.use_balanced_sampling;
  st["decision_mode"] = to_string(s.decision_mode);
  st["seed"] = s.seed;
  j["stream"] = st;
  return j;
}

ExperimentConfig from_ojson(const ojson& j) {
  ExperimentConfig c;
  c.name = j.at("name").get<std::string>();
  const ojson& a = j.at("architecture");
  c.arch.input_dim = a.at("input_dim").get<std::size_t>();
  c.arch.hidden_dims = a.at("hidden_dims").get<std::vector<std::size_t>>();
  c.arch.with_heads = a.at("with_heads").get<bool>();
  c.arch.batch_norm = a.at("batch_norm").get<bool>();
  c.arch.bn_epsilon = a.at("bn_epsilon").get<double>();
  c.arch.bn_momentum = a.at("bn_momentum").get<double>();

  const ojson& tr = j.at("training");
  TrainingConfig& t = c.training;
  t.objective = parse_enum<Objective>("training.objective", tr.at("objective").get<std::string>(),
                                      {{"crc", Objective::Crc}, {"improved", Objective::Improved}});
  t.crc.tau = tr.at("crc_tau").get<double>();
  t.crc.denominator = parse_enum<CrcDenominator>(
      "training.crc_denominator", tr.at("crc_denominator").get<std::string>(),
      {{"global", CrcDenominator::Global}, {"per_anchor", CrcDenominator::PerAnchor}});
  t.improved.lambda_enc = tr.at("lambda_enc").get<double>();
  t.improved.recon_weight = tr.at("recon_weight").get<double>();
  t.optimizer = parse_enum<OptimizerKind>("training.optimizer", tr.at("optimizer").get<std::string>(),
                                          {{"sgd", OptimizerKind::Sgd}, {"adam", OptimizerKind::Adam}});
  t.learning_rate = tr.at("learning_rate").get<double>();
  t.weight_decay = tr.at("weight_decay").get<double>();
  t.schedule = parse_enum<ScheduleKind>("training.schedule", tr.at("schedule").get<std::string>(),
                                        {{"constant", ScheduleKind::Constant}, {"cosine", ScheduleKind::Cosine}});
  t.eta_min = tr.at("eta_min").get<double>();
  t.t_max = tr.at("t_max").get<int>();
  t.batch_size = tr.at("batch_size").get<std::size_t>();

  const ojson& st = j.at("stream");
  StreamConfig& s = c.stream;
  s.initial_fraction = st.at("initial_fraction").get<double>();
  s.stream_batch_size = st.at("stream_batch_size").get<std::size_t>();
  s.epoch0 = st.at("epoch0").get<int>();
  s.epoch1 = st.at("epoch1").get<int>();
  s.gate_mode = parse_enum<GateMode>("stream.gate_mode", st.at("gate_mode").get<std::string>(),
                                     {{"base", GateMode::Base}, {"filtered", GateMode::Filtered}});
  s.confidence_threshold = st.at("confidence_threshold").get<double>();
  s.gate_requires_both_heads = st.at("gate_requires_both_heads").get<bool>();
  s.flip_fraction = st.at("flip_fraction").get<double>();
  s.use_mixup = st.at("use_mixup").get<bool>();
  s.mixup_alpha = st.at("mixup_alpha").get<double>();
  s.use_balanced_sampling = st.at("use_balanced_sampling").get<bool>();
  s.decision_mode = parse_enum<DecisionMode>("stream.decision_mode", st.at("decision_mode").get<std::string>(),
                                             {{"gaussian", DecisionMode::Gaussian}, {"heads", DecisionMode::Heads}});
  s.seed = st.at("seed").get<std::uint64_t>();
  return c;
}

// Overlays `patch` onto `base`, refusing keys that `base` does not have.
void merge_checked(ojson& base, const nlohmann::json& patch, const std::string& path) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    require(base.contains(it.key()), ErrorKind::InvalidArgument, "config: unknown key '" + key + "'");
    if (it.value().is_object()) {
      require(base[it.key()].is_object(), ErrorKind::InvalidArgument, "config: '" + key + "' is not a section");
      merge_checked(base[it.key()], it.value(), key);
    } else {
      base[it.key()] = it.value();
    }
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  require(!arch.hidden_dims.empty(), ErrorKind::InvalidArgument, "config: architecture.hidden_dims is empty");
  for (auto h : arch.hidden_dims) require(h > 0, ErrorKind::InvalidArgument, "config: hidden sizes must be positive");
  require(training.crc.tau > 0.0, ErrorKind::InvalidArgument, "config: crc_tau must be positive");
  require(training.improved.lambda_enc >= 0.0 && training.improved.recon_weight >= 0.0, ErrorKind::InvalidArgument,
          "config: loss weights must be non-negative");
  require(training.learning_rate > 0.0 && training.weight_decay >= 0.0, ErrorKind::InvalidArgument,
          "config: learning_rate must be positive and weight_decay non-negative");
  require(training.eta_min >= 0.0 && training.eta_min <= training.learning_rate && training.t_max > 0,
          ErrorKind::InvalidArgument, "config: cosine schedule needs 0 <= eta_min <= learning_rate and t_max > 0");
  require(training.batch_size >= 2, ErrorKind::InvalidArgument, "config: batch_size must be at least 2");
  require(stream.initial_fraction > 0.0 && stream.initial_fraction < 1.0, ErrorKind::InvalidArgument,
          "config: initial_fraction must be in (0,1)");
  require(stream.stream_batch_size > 0, ErrorKind::InvalidArgument, "config: stream_batch_size must be positive");
  require(stream.epoch0 >= 0 && stream.epoch1 >= 0, ErrorKind::InvalidArgument, "config: epochs must be non-negative");
  require(stream.confidence_threshold > 0.5 && stream.confidence_threshold <= 1.0, ErrorKind::InvalidArgument,
          "config: confidence_threshold must be in (0.5, 1]");
  require(stream.flip_fraction >= 0.0 && stream.flip_fraction <= 1.0, ErrorKind::InvalidArgument,
          "config: flip_fraction must be in [0,1]");
  require(stream.mixup_alpha > 0.0, ErrorKind::InvalidArgument, "config: mixup_alpha must be positive");
  const bool needs_heads = training.objective == Objective::Improved || stream.gate_mode == GateMode::Filtered ||
                           stream.decision_mode == DecisionMode::Heads;
  require(!needs_heads || arch.with_heads, ErrorKind::InvalidArgument,
          "config: the improved objective, filtered gate and heads decision all need with_heads = true");
}

ExperimentConfig ExperimentConfig::base_replication() {
  ExperimentConfig c;
  c.name = "base";
  c.arch = ArchitectureSpec::base(0);
  c.training.objective = Objective::Crc;
  c.training.crc.tau = 0.02;
  c.training.optimizer = OptimizerKind::Sgd;
  c.training.learning_rate = 1e-3;
  c.training.weight_decay = 0.0;
  c.training.schedule = ScheduleKind::Constant;
  c.training.batch_size = 128;
  c.stream.epoch0 = 300;
  c.stream.epoch1 = 3;
  c.stream.gate_mode = GateMode::Base;
  c.stream.flip_fraction = 0.05;
  c.stream.decision_mode = DecisionMode::Gaussian;
  return c;
}

ExperimentConfig ExperimentConfig::improved(bool pseudo_filter, bool mixup, bool lite) {
  ExperimentConfig c;
  c.arch = lite ? ArchitectureSpec::lite(0) : ArchitectureSpec::base(0);
  c.arch.with_heads = true;
  c.training.objective = Objective::Improved;
  c.training.improved = {1.0, 0.1};
  c.training.optimizer = OptimizerKind::Adam;
  c.training.learning_rate = 1e-3;
  c.training.weight_decay = 1e-4;
  c.training.schedule = ScheduleKind::Cosine;
  c.training.eta_min = 1e-5;
  c.training.t_max = 50;
  c.training.batch_size = 256;
  c.stream.epoch0 = 50;
  c.stream.epoch1 = 3;
  c.stream.gate_mode = pseudo_filter ? GateMode::Filtered : GateMode::Base;
  c.stream.confidence_threshold = 0.85;
  c.stream.flip_fraction = 0.05;
  c.stream.use_mixup = mixup;
  c.stream.mixup_alpha = 0.2;
  c.stream.use_balanced_sampling = true;
  c.stream.decision_mode = DecisionMode::Heads;
  std::string name = "imp";
  if (pseudo_filter) name += "2";
  if (mixup) name += "3";
  if (lite) name += "4";
  c.name = name == "imp" ? "improved-stack" : name;
  return c;
}

ExperimentConfig preset_config(const std::string& name) {
  if (name == "base") return ExperimentConfig::base_replication();
  if (name.size() > 3 && name.rfind("imp", 0) == 0) {
    const std::string flags = name.substr(3);
    const bool known = flags == "2" || flags == "3" || flags == "4" || flags == "23" || flags == "24" ||
                       flags == "34" || flags == "234";
    if (known) {
      return ExperimentConfig::improved(flags.find('2') != std::string::npos, flags.find('3') != std::string::npos,
                                        flags.find('4') != std::string::npos);
    }
  }
  fail(ErrorKind::InvalidArgument, "unknown preset '" + name + "' (base, imp2, imp3, imp4, imp23, imp24, imp34, imp234)");
}

std::string config_to_json(const ExperimentConfig& cfg) { return to_ojson(cfg).dump(2) + "\n"; }

ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& defaults) {
  nlohmann::json patch;
  try {
    patch = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("config: ") + e.what());
  }
  require(patch.is_object(), ErrorKind::Parse, "config: top level must be an object");
  ojson merged = to_ojson(defaults);
  if (patch.contains("preset")) {
    require(patch["preset"].is_string(), ErrorKind::Parse, "config: preset must be a string");
    merged = to_ojson(preset_config(patch["preset"].get<std::string>()));
    patch.erase("preset");
  }
  try {
    merge_checked(merged, patch, "");
    ExperimentConfig c = from_ojson(merged);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), ExperimentConfig::base_replication());
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << config_to_json(cfg);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace aocids
