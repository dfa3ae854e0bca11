#include "modpipe/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "modpipe/metrics.hpp"
#include "modpipe/pipeline.hpp"
#include "modpipe/synth.hpp"

namespace modpipe {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kUsage: return 2;
    case ErrorCategory::kParse: return 3;
    case ErrorCategory::kValidation: return 4;
    case ErrorCategory::kInput: return 5;
    case ErrorCategory::kContractViolation: return 6;
    case ErrorCategory::kTransport: return 7;
    case ErrorCategory::kMissingFixture: return 8;
    case ErrorCategory::kMissingInput: return 9;
    case ErrorCategory::kTraining: return 10;
    case ErrorCategory::kInternal: return 1;
  }
  return 1;
}

namespace {

constexpr std::array<SplitName, 3> kAllSplits{SplitName::kTrain, SplitName::kValidation,
                                              SplitName::kTest};

const std::set<std::string> kConfigKeys{
    "task",        "split",           "datasets",      "fusion_mode",  "detector",
    "detector_predictor", "oversample_factor", "seed", "cache_dir",    "fixtures_dir",
    "out",         "max_in_flight",   "embedding",     "svm",          "mlp",
    "predictors",  "ensemble",        "task2",         "command"};
const std::set<std::string> kEnsembleConfigKeys{"predictors", "ensemble", "task2"};

fs::path resolve(const fs::path& base, const fs::path& p) {
  fs::path out = (p.empty() || p.is_absolute() || base.empty()) ? p.lexically_normal()
                                                                 : (base / p).lexically_normal();
  if (!out.has_filename() && out.has_parent_path()) out = out.parent_path();
  return out;
}

json read_json_file(const fs::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError(std::string(what) + " " + path.string() + " does not exist");
  try {
    json doc = json::parse(in);
    if (!doc.is_object()) throw ParseError(std::string(what) + " " + path.string() + " must be an object");
    return doc;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + " " + path.string() + ": " + e.what());
  }
}

void check_keys(const json& doc, const std::set<std::string>& allowed, const std::string& source) {
  for (const auto& [key, value] : doc.items()) {
    if (!allowed.count(key)) throw UsageError("unknown key '" + key + "' in " + source);
  }
}

/// Predictor fixture paths are anchored to the file that declared them.
void anchor_fixtures(json& predictors, const fs::path& base) {
  if (!predictors.is_object()) throw UsageError("'predictors' must be an object");
  for (auto& [name, spec] : predictors.items()) {
    if (spec.contains("fixture")) {
      spec["fixture"] = resolve(base, spec["fixture"].get<std::string>()).string();
    }
  }
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config key '") + key + "' has the wrong type");
  }
}

Task task_from(const json& value) {
  const std::string text = value.is_number() ? std::to_string(value.get<int>()) : value.get<std::string>();
  auto t = parse_task(text);
  if (!t) throw UsageError("task must be 1, 2 or 3 (got '" + text + "')");
  return *t;
}

PredictorSpec predictor_from(const std::string& name, const json& doc) {
  PredictorSpec p;
  p.name = name;
  const std::string kind = get_or<std::string>(doc, "kind", "replay");
  auto k = parse_predictor_kind(kind);
  if (!k) throw UsageError("predictor '" + name + "' has unknown kind '" + kind + "'");
  p.kind = *k;
  p.endpoint = get_or<std::string>(doc, "endpoint", "");
  p.model_name = get_or<std::string>(doc, "model_name", "");
  p.api_key_env = get_or<std::string>(doc, "api_key_env", "");
  p.fixture_path = get_or<std::string>(doc, "fixture", "");
  if (doc.contains("template")) {
    const std::string t = doc["template"].get<std::string>();
    p.template_id = parse_template_id(t);
    if (!p.template_id) throw UsageError("predictor '" + name + "' names unknown template '" + t + "'");
  }
  for (const auto& [key, value] : doc.items()) {
    static const std::set<std::string> allowed{"kind", "endpoint", "model_name", "api_key_env",
                                               "fixture", "template"};
    if (!allowed.count(key)) throw UsageError("unknown key '" + key + "' in predictor '" + name + "'");
  }
  p.validate();
  return p;
}

ordered_json predictor_json(const PredictorSpec& p) {
  ordered_json doc;
  doc["kind"] = std::string(to_string(p.kind));
  if (p.template_id) doc["template"] = std::string(to_string(*p.template_id));
  if (!p.fixture_path.empty()) doc["fixture"] = p.fixture_path.string();
  if (!p.endpoint.empty()) doc["endpoint"] = p.endpoint;
  if (!p.model_name.empty()) doc["model_name"] = p.model_name;
  if (!p.api_key_env.empty()) doc["api_key_env"] = p.api_key_env;
  return doc;
}

bool uses_fusion(const RunConfig& cfg) {
  if (cfg.task == Task::kMeme) return cfg.detector == "svm";
  if (cfg.task == Task::kHopeHate) {
    return std::find(cfg.voters.begin(), cfg.voters.end(), kSvmTextVoter) != cfg.voters.end();
  }
  return false;
}

std::vector<SplitName> splits_for(const RunConfig& cfg) {
  const std::string& c = cfg.command;
  if (c == "train-svm") return {SplitName::kTrain};
  if (c == "train-mlp") return {SplitName::kTrain, SplitName::kValidation};
  if (c == "predict" || c == "evaluate") return {cfg.split};
  std::vector<SplitName> all;
  for (const auto& [s, p] : cfg.datasets) all.push_back(s);
  return all;
}

void require_predictor(const RunConfig& cfg, const std::string& name, const std::string& role) {
  if (name.empty()) throw UsageError(role + " is not configured");
  if (name == kSvmTextVoter && role.rfind("voter", 0) == 0) return;
  if (!cfg.predictors.count(name)) {
    throw UsageError(role + " names unknown predictor '" + name + "'; declare it under 'predictors'");
  }
}

void validate_plan(const RunConfig& cfg, bool detector_flag) {
  if (cfg.oversample_factor < 1) throw ValidationError("--oversample-factor must be >= 1");
  if (cfg.max_in_flight < 1) throw ValidationError("--max-in-flight must be >= 1");
  cfg.embedding.validate();
  cfg.svm.validate();
  cfg.mlp.validate();
  static const std::set<std::string> detectors{"svm", "mlp", "llm", "safety"};
  if (!detectors.count(cfg.detector)) {
    throw UsageError("--detector must be one of svm, mlp, llm, safety (got '" + cfg.detector + "')");
  }
  if (detector_flag && cfg.task != Task::kMeme) {
    throw UsageError("--detector applies to task 3 only; drop it or use --task 3");
  }

  switch (cfg.task) {
    case Task::kHopeHate: {
      for (std::size_t i = 0; i < 3; ++i) require_predictor(cfg, cfg.voters[i], "voter " + std::to_string(i + 1));
      std::array<std::string, 3> a = cfg.voters;
      std::array<std::string, 3> b = cfg.priority;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b) throw UsageError("ensemble priority must list the three voters exactly once");
      if (!cfg.rescue.empty()) require_predictor(cfg, cfg.rescue, "rescue predictor");
      break;
    }
    case Task::kMultiTask:
      require_predictor(cfg, cfg.emotion_predictor, "task2.emotion");
      require_predictor(cfg, cfg.offensive_predictor, "task2.offensive");
      require_predictor(cfg, cfg.hate_predictor, "task2.hate");
      break;
    case Task::kMeme:
      if (cfg.detector == "llm" || cfg.detector == "safety") {
        require_predictor(cfg, cfg.detector_predictor, "detector predictor");
        const PredictorSpec& p = cfg.predictors.at(cfg.detector_predictor);
        if (cfg.detector == "llm" && !p.template_id) {
          throw UsageError("llm detector '" + p.name + "' needs a prompt template");
        }
        if (cfg.detector == "safety" && p.template_id) {
          throw UsageError("safety detector '" + p.name + "' must not have a prompt template");
        }
      }
      break;
  }

  if (cfg.command == "train-svm" && cfg.task == Task::kMultiTask) {
    throw UsageError("train-svm applies to task 1 (text voter) and task 3 (detector)");
  }
  if (cfg.command == "train-mlp" && cfg.task != Task::kMeme) {
    throw UsageError("train-mlp applies to task 3 only");
  }

  for (SplitName s : splits_for(cfg)) {
    auto it = cfg.datasets.find(s);
    if (it == cfg.datasets.end()) {
      throw UsageError("no " + std::string(to_string(s)) + " dataset configured; pass --" +
                       std::string(to_string(s)) + " FILE");
    }
    if (!fs::exists(it->second)) {
      throw MissingInputError(std::string(to_string(s)) + " dataset " + it->second.string() +
                              " does not exist");
    }
  }

  // Modalities demanded by the chosen fusion/detector must exist in the data.
  const bool image_needed = (uses_fusion(cfg) && needs_image(cfg.fusion)) ||
                            (cfg.task == Task::kMeme && cfg.detector == "mlp");
  const bool text_needed = (uses_fusion(cfg) && needs_text(cfg.fusion)) ||
                           (cfg.task == Task::kMeme && cfg.detector == "mlp");
  if (!image_needed && !text_needed) return;
  for (SplitName s : splits_for(cfg)) {
    const fs::path& path = cfg.datasets.at(s);
    const DatasetSplit split = load_dataset(path, cfg.task, s);
    std::size_t no_image = 0;
    std::size_t no_text = 0;
    for (const auto& r : split.records) {
      no_image += !r.image_ref;
      no_text += r.text.empty();
    }
    const std::string what = cfg.task == Task::kMeme && cfg.detector == "mlp"
                                 ? std::string("--detector mlp")
                                 : "--fusion " + std::string(to_string(cfg.fusion));
    if (image_needed && no_image > 0) {
      throw UsageError(what + " needs images but " + std::to_string(no_image) + " records in " +
                       path.string() + " have none; use --fusion text");
    }
    if (text_needed && no_text > 0) {
      throw UsageError(what + " needs text but " + std::to_string(no_text) + " records in " +
                       path.string() + " have none; use --fusion image");
    }
  }
}

}  // namespace

ordered_json RunConfig::to_json() const {
  ordered_json doc;
  doc["command"] = command;
  doc["task"] = static_cast<int>(task);
  doc["split"] = std::string(to_string(split));
  ordered_json ds = ordered_json::object();
  for (const auto& [s, p] : datasets) ds[std::string(to_string(s))] = p.string();
  doc["datasets"] = std::move(ds);
  doc["fusion_mode"] = std::string(to_string(fusion));
  doc["detector"] = detector;
  doc["detector_predictor"] = detector_predictor;
  doc["oversample_factor"] = oversample_factor;
  doc["seed"] = seed;
  doc["cache_dir"] = cache_dir.string();
  doc["fixtures_dir"] = fixtures_dir.string();
  doc["out"] = out_dir.string();
  doc["max_in_flight"] = max_in_flight;
  doc["embedding"] = {{"kind", std::string(to_string(embedding.kind))},
                      {"endpoint", embedding.endpoint},
                      {"model_name", embedding.model_name},
                      {"api_key_env", embedding.api_key_env},
                      {"label_leak", embedding.label_leak}};
  ordered_json gamma;
  if (const auto* fixed = std::get_if<GammaFixed>(&svm.gamma)) {
    gamma = fixed->value;
  } else {
    gamma = "scale";
  }
  doc["svm"] = {{"C", svm.C},
                {"gamma", gamma},
                {"class_weight", svm.class_weight == ClassWeightMode::kBalanced ? "balanced" : "uniform"},
                {"kkt_tolerance", svm.kkt_tolerance},
                {"max_passes", svm.max_passes}};
  doc["mlp"] = {{"branch_dims", mlp.branch_dims},
                {"head_dims", mlp.head_dims},
                {"dropout_rate", mlp.dropout_rate},
                {"learning_rate", mlp.learning_rate},
                {"batch_size", mlp.batch_size},
                {"max_epochs", mlp.max_epochs},
                {"patience", mlp.patience},
                {"standardize_inputs", mlp.standardize_inputs}};
  ordered_json preds = ordered_json::object();
  for (const auto& [name, spec] : predictors) preds[name] = predictor_json(spec);
  doc["predictors"] = std::move(preds);
  if (task == Task::kHopeHate) {
    doc["ensemble"] = {{"voters", voters}, {"priority", priority}, {"rescue", rescue}};
  }
  if (task == Task::kMultiTask) {
    doc["task2"] = {{"emotion", emotion_predictor},
                    {"offensive", offensive_predictor},
                    {"hate", hate_predictor}};
  }
  return doc;
}

RunConfig plan_run(const std::string& command, const CliOverrides& o) {
  json doc = json::object();
  fs::path fixtures_base;
  if (o.config) {
    const fs::path path(*o.config);
    doc = read_json_file(path, "config file");
    check_keys(doc, kConfigKeys, path.string());
    const fs::path base = path.parent_path();
    if (doc.contains("datasets")) {
      for (auto& [split, p] : doc["datasets"].items()) p = resolve(base, p.get<std::string>()).string();
    }
    fixtures_base = resolve(base, get_or<std::string>(doc, "fixtures_dir", "."));
    if (doc.contains("cache_dir")) doc["cache_dir"] = resolve(base, doc["cache_dir"].get<std::string>()).string();
    if (doc.contains("out")) doc["out"] = resolve(base, doc["out"].get<std::string>()).string();
  }
  if (o.fixtures) fixtures_base = fs::path(*o.fixtures).lexically_normal();
  if (doc.contains("predictors")) anchor_fixtures(doc["predictors"], fixtures_base);

  if (o.ensemble_config) {
    const fs::path path(*o.ensemble_config);
    json ens = read_json_file(path, "ensemble config");
    check_keys(ens, kEnsembleConfigKeys, path.string());
    const fs::path base = o.fixtures ? fixtures_base : path.parent_path();
    if (ens.contains("predictors")) {
      anchor_fixtures(ens["predictors"], base);
      for (auto& [name, spec] : ens["predictors"].items()) doc["predictors"][name] = spec;
    }
    if (ens.contains("ensemble")) doc["ensemble"] = ens["ensemble"];
    if (ens.contains("task2")) doc["task2"] = ens["task2"];
  }

  if (o.task) doc["task"] = *o.task;
  if (o.split) doc["split"] = *o.split;
  if (o.fusion) doc["fusion_mode"] = *o.fusion;
  if (o.detector) doc["detector"] = *o.detector;
  if (o.oversample_factor) doc["oversample_factor"] = *o.oversample_factor;
  if (o.seed) doc["seed"] = *o.seed;
  if (o.cache_dir) doc["cache_dir"] = *o.cache_dir;
  if (o.out) doc["out"] = *o.out;
  if (o.max_in_flight) doc["max_in_flight"] = *o.max_in_flight;
  if (o.train) doc["datasets"]["train"] = *o.train;
  if (o.validation) doc["datasets"]["validation"] = *o.validation;
  if (o.test) doc["datasets"]["test"] = *o.test;

  RunConfig cfg;
  cfg.command = command;
  if (!doc.contains("task")) throw UsageError("--task is required (or set \"task\" in --config)");
  try {
    cfg.task = task_from(doc["task"]);
    const std::string split = get_or<std::string>(doc, "split", "test");
    auto s = parse_split_name(split);
    if (!s) throw UsageError("--split must be train, validation or test (got '" + split + "')");
    cfg.split = *s;
    if (doc.contains("datasets")) {
      for (const auto& [name, p] : doc["datasets"].items()) {
        auto sn = parse_split_name(name);
        if (!sn) throw UsageError("unknown dataset split '" + name + "'");
        cfg.datasets[*sn] = fs::path(p.get<std::string>()).lexically_normal();
      }
    }
    const std::string fusion =
        get_or<std::string>(doc, "fusion_mode", cfg.task == Task::kMeme ? "avg" : "text");
    auto f = parse_fusion_mode(fusion);
    if (!f) throw UsageError("--fusion must be text, image, avg or concat (got '" + fusion + "')");
    cfg.fusion = *f;
    cfg.detector = get_or<std::string>(doc, "detector", "svm");
    cfg.detector_predictor = get_or<std::string>(
        doc, "detector_predictor",
        cfg.detector == "safety" ? "safety_adapter" : (cfg.detector == "llm" ? "meme_prompt3" : ""));
    cfg.oversample_factor = get_or<int>(doc, "oversample_factor", 1);
    cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);
    cfg.cache_dir = get_or<std::string>(doc, "cache_dir", "");
    cfg.fixtures_dir = fixtures_base;
    cfg.out_dir = fs::path(get_or<std::string>(doc, "out", "modpipe-out")).lexically_normal();
    cfg.max_in_flight = get_or<std::size_t>(doc, "max_in_flight", 4);

    if (doc.contains("embedding")) {
      const json& e = doc["embedding"];
      const std::string kind = get_or<std::string>(e, "kind", "stub");
      auto k = parse_provider_kind(kind);
      if (!k) throw UsageError("unknown embedding provider kind '" + kind + "'");
      cfg.embedding.kind = *k;
      cfg.embedding.endpoint = get_or<std::string>(e, "endpoint", "");
      cfg.embedding.model_name = get_or<std::string>(e, "model_name", cfg.embedding.model_name);
      cfg.embedding.api_key_env = get_or<std::string>(e, "api_key_env", "");
      cfg.embedding.label_leak = get_or<double>(e, "label_leak", 0.0);
    }
    if (doc.contains("svm")) {
      const json& s_doc = doc["svm"];
      cfg.svm.C = get_or<double>(s_doc, "C", cfg.svm.C);
      if (s_doc.contains("gamma")) {
        if (s_doc["gamma"].is_string()) {
          if (s_doc["gamma"] != "scale") throw UsageError("svm.gamma must be \"scale\" or a number");
          cfg.svm.gamma = GammaScale{};
        } else {
          cfg.svm.gamma = GammaFixed{s_doc["gamma"].get<double>()};
        }
      }
      const std::string cw = get_or<std::string>(s_doc, "class_weight", "balanced");
      if (cw != "balanced" && cw != "uniform") throw UsageError("svm.class_weight must be balanced or uniform");
      cfg.svm.class_weight = cw == "balanced" ? ClassWeightMode::kBalanced : ClassWeightMode::kUniform;
      cfg.svm.kkt_tolerance = get_or<double>(s_doc, "kkt_tolerance", cfg.svm.kkt_tolerance);
      cfg.svm.max_passes = get_or<int>(s_doc, "max_passes", cfg.svm.max_passes);
    }
    if (doc.contains("mlp")) {
      const json& m = doc["mlp"];
      cfg.mlp.branch_dims = get_or(m, "branch_dims", cfg.mlp.branch_dims);
      cfg.mlp.head_dims = get_or(m, "head_dims", cfg.mlp.head_dims);
      cfg.mlp.dropout_rate = get_or<double>(m, "dropout_rate", cfg.mlp.dropout_rate);
      cfg.mlp.learning_rate = get_or<double>(m, "learning_rate", cfg.mlp.learning_rate);
      cfg.mlp.batch_size = get_or<int>(m, "batch_size", cfg.mlp.batch_size);
      cfg.mlp.max_epochs = get_or<int>(m, "max_epochs", cfg.mlp.max_epochs);
      cfg.mlp.patience = get_or<int>(m, "patience", cfg.mlp.patience);
      cfg.mlp.standardize_inputs = get_or<bool>(m, "standardize_inputs", false);
    }
    cfg.mlp.seed = cfg.seed;
    if (doc.contains("predictors")) {
      for (const auto& [name, spec] : doc["predictors"].items()) {
        cfg.predictors.emplace(name, predictor_from(name, spec));
      }
    }
    if (doc.contains("ensemble")) {
      const json& e = doc["ensemble"];
      const auto voters = get_or<std::vector<std::string>>(e, "voters", {});
      if (voters.size() != 3) throw UsageError("ensemble.voters must name exactly three voters");
      std::copy(voters.begin(), voters.end(), cfg.voters.begin());
      const auto priority = get_or<std::vector<std::string>>(e, "priority", voters);
      if (priority.size() != 3) throw UsageError("ensemble.priority must list three voters");
      std::copy(priority.begin(), priority.end(), cfg.priority.begin());
      cfg.rescue = get_or<std::string>(e, "rescue", "");
    }
    if (doc.contains("task2")) {
      const json& t = doc["task2"];
      cfg.emotion_predictor = get_or<std::string>(t, "emotion", "");
      cfg.offensive_predictor = get_or<std::string>(t, "offensive", "");
      cfg.hate_predictor = get_or<std::string>(t, "hate", "");
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed configuration: ") + e.what());
  }
  validate_plan(cfg, o.detector.has_value());
  return cfg;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

namespace {

struct Runner {
  const RunConfig& cfg;
  std::shared_ptr<Transport> transport;
  std::ostream& out;
  std::ostream& err;

  DatasetSplit load(SplitName s) const { return load_dataset(cfg.datasets.at(s), cfg.task, s); }

  std::shared_ptr<EmbeddingCache> cache() const {
    if (cfg.cache_dir.empty()) return nullptr;
    return std::make_shared<EmbeddingCache>(cfg.cache_dir);
  }

  std::shared_ptr<Embedder> embedder(const fs::path& image_root) const {
    return std::make_shared<Embedder>(cfg.embedding, cache(), transport, image_root);
  }

  std::shared_ptr<Gateway> gateway(const fs::path& image_root) const {
    auto g = std::make_shared<Gateway>(transport);
    g->set_image_root(image_root);
    return g;
  }

  fs::path out_path(const std::string& name) const { return cfg.out_dir / name; }

  std::string split_name() const { return std::string(to_string(cfg.split)); }

  void snapshot() const {
    fs::create_directories(cfg.out_dir);
    std::ofstream f(out_path("effective_config." + cfg.command + ".json"), std::ios::binary | std::ios::trunc);
    f << cfg.to_json().dump(2) << '\n';
  }

  /// Training split, with the least frequent class repeated when asked.
  DatasetSplit training_split() const {
    DatasetSplit train = load(SplitName::kTrain);
    if (cfg.oversample_factor == 1) return train;
    const LabelSelector selector = select_label(primary_field(cfg.task));
    auto hist = class_histogram(train, selector);
    hist.erase(std::string(kMissingLabel));
    if (hist.empty()) throw InputError("training split has no labels to rebalance");
    auto minority = std::min_element(hist.begin(), hist.end(), [](const auto& a, const auto& b) {
      return a.second < b.second;
    });
    out << "oversampling '" << minority->first << "' x" << cfg.oversample_factor << " ("
        << minority->second << " records)\n";
    return oversample_minority(train, selector, minority->first, cfg.oversample_factor,
                               mix_seed(cfg.seed, 11));
  }

  static std::vector<std::string> gold_labels(const DatasetSplit& split, Task task) {
    const LabelSelector selector = select_label(primary_field(task));
    std::vector<std::string> labels;
    for (const auto& r : split.records) {
      auto l = selector(r);
      if (!l) throw InputError("training record '" + r.id + "' has no gold label");
      labels.push_back(*l);
    }
    return labels;
  }

  int embed() const {
    if (cfg.cache_dir.empty()) {
      throw UsageError("embed populates the cache; pass --cache-dir DIR");
    }
    std::size_t total = 0;
    for (const auto& [s, path] : cfg.datasets) {
      const DatasetSplit split = load(s);
      const auto e = embedder(split.base_dir);
      const LabelSelector selector = select_label(primary_field(cfg.task));
      std::vector<EmbedRequest> requests;
      for (const auto& r : split.records) {
        const auto leak = selector(r);
        if (!r.text.empty()) requests.push_back({r.text, Modality::kText, leak});
        if (r.image_ref) requests.push_back({*r.image_ref, Modality::kImage, leak});
      }
      e->embed_many(requests, cfg.max_in_flight);
      out << to_string(s) << ": " << requests.size() << " embeddings\n";
      total += requests.size();
    }
    out << "cache " << cfg.cache_dir.string() << " holds all " << total << " embeddings\n";
    return 0;
  }

  int train_svm() const {
    const DatasetSplit train = training_split();
    const auto e = embedder(train.base_dir);
    const Eigen::MatrixXd X = fused_features(*e, train.records, cfg.task, cfg.fusion, cfg.max_in_flight);
    const auto labels = gold_labels(train, cfg.task);
    fs::create_directories(cfg.out_dir);
    if (cfg.task == Task::kHopeHate) {
      const OneVsRestSvm model = train_one_vs_rest(X, labels, cfg.svm, cfg.seed);
      const fs::path path = out_path("svm_text.json");
      save_one_vs_rest(model, path);
      for (std::size_t k = 0; k < model.classes.size(); ++k) {
        const auto& m = model.models[k];
        out << model.classes[k] << " vs rest: " << m.dual_coefs.size() << " support vectors, "
            << m.iterations << " iterations" << (m.converged ? "" : " (not converged)") << '\n';
        if (!m.converged) err << "warning: SMO for '" << model.classes[k] << "' hit the iteration budget\n";
      }
      out << "wrote " << path.string() << '\n';
      return 0;
    }
    const SvmModel model = train_smo(X, labels, cfg.svm, cfg.seed, std::string(to_string(MemeHate::kHateful)));
    const fs::path path = out_path("svm.json");
    save_svm(model, path);
    if (!model.converged) err << "warning: SMO hit the iteration budget before meeting the tolerance\n";
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      correct += model.predict(X.row(i).transpose()) == labels[static_cast<std::size_t>(i)];
    }
    out << "trained on " << X.rows() << " x " << X.cols() << ": " << model.dual_coefs.size()
        << " support vectors, " << model.iterations << " iterations, training accuracy "
        << correct << "/" << X.rows() << '\n';
    out << "wrote " << path.string() << '\n';
    return 0;
  }

  int train_mlp_cmd() const {
    const DatasetSplit train = training_split();
    const DatasetSplit validation = load(SplitName::kValidation);
    const std::string positive(to_string(MemeHate::kHateful));
    const MlpData train_data =
        mlp_features(*embedder(train.base_dir), train.records, cfg.task, positive, cfg.max_in_flight);
    const MlpData val_data = mlp_features(*embedder(validation.base_dir), validation.records,
                                          cfg.task, positive, cfg.max_in_flight);
    const MlpModel model = train_mlp(cfg.mlp, train_data, val_data);
    fs::create_directories(cfg.out_dir);
    const fs::path path = out_path("mlp.json");
    save_mlp(model, path);
    const auto& last = model.training_log.back();
    out << "trained " << model.training_log.size() << " epochs, best epoch " << model.best_epoch
        << ", last train loss " << last.train_loss << ", last validation loss "
        << last.validation_loss << '\n';
    out << "wrote " << path.string() << '\n';
    return 0;
  }

  PredictorPtr llm(const std::shared_ptr<Gateway>& g, const std::string& name) const {
    return std::make_shared<GatewayPredictor>(g, cfg.predictors.at(name));
  }

  std::function<Prediction(const Record&)> task_function(const DatasetSplit& split) const {
    const auto g = gateway(split.base_dir);
    switch (cfg.task) {
      case Task::kHopeHate: {
        EnsembleSpec ensemble;
        for (std::size_t i = 0; i < 3; ++i) {
          if (cfg.voters[i] == kSvmTextVoter) {
            const fs::path path = out_path("svm_text.json");
            if (!fs::exists(path)) {
              throw MissingInputError("voter svm_text needs " + path.string() + "; run train-svm first");
            }
            ensemble.voters[i] = std::make_shared<OneVsRestPredictor>(
                std::string(kSvmTextVoter), embedder(split.base_dir), load_one_vs_rest(path),
                cfg.task, cfg.fusion);
          } else {
            ensemble.voters[i] = llm(g, cfg.voters[i]);
          }
          const auto pos = std::find(cfg.priority.begin(), cfg.priority.end(), cfg.voters[i]);
          ensemble.priority[static_cast<std::size_t>(pos - cfg.priority.begin())] = i;
        }
        if (!cfg.rescue.empty()) ensemble.rescue = llm(g, cfg.rescue);
        return [ensemble](const Record& r) { return run_task1(r, ensemble); };
      }
      case Task::kMultiTask: {
        Task2Predictors preds{llm(g, cfg.emotion_predictor), llm(g, cfg.offensive_predictor),
                              llm(g, cfg.hate_predictor)};
        return [preds](const Record& r) { return run_task2(r, preds); };
      }
      case Task::kMeme: {
        PredictorPtr detector;
        if (cfg.detector == "svm") {
          const fs::path path = out_path("svm.json");
          if (!fs::exists(path)) throw MissingInputError("no SVM at " + path.string() + "; run train-svm first");
          detector = std::make_shared<SvmPredictor>("svm_" + std::string(to_string(cfg.fusion)),
                                                    embedder(split.base_dir), load_svm(path),
                                                    cfg.task, cfg.fusion);
        } else if (cfg.detector == "mlp") {
          const fs::path path = out_path("mlp.json");
          if (!fs::exists(path)) throw MissingInputError("no MLP at " + path.string() + "; run train-mlp first");
          detector = std::make_shared<MlpPredictor>("mlp", embedder(split.base_dir), load_mlp(path),
                                                    cfg.task, std::string(to_string(MemeHate::kHateful)),
                                                    std::string(to_string(MemeHate::kNotHateful)));
        } else if (cfg.detector == "llm") {
          detector = llm(g, cfg.detector_predictor);
        } else {
          detector = std::make_shared<SafetyPredictor>(g, cfg.predictors.at(cfg.detector_predictor));
        }
        return [detector](const Record& r) { return run_task3(r, *detector); };
      }
    }
    throw ContractViolation("unknown task");
  }

  int predict() const {
    const DatasetSplit split = load(cfg.split);
    const auto fn = task_function(split);
    const auto predictions = run_records(split.records, fn, cfg.max_in_flight);
    const fs::path path = out_path("predictions_" + split_name() + ".jsonl");
    write_predictions(path, predictions);
    std::size_t failed = 0;
    for (const auto& p : predictions) {
      if (!p.failed) continue;
      if (failed < 5) err << "warning: record '" << p.record_id << "' failed: " << p.error << '\n';
      ++failed;
    }
    out << "wrote " << predictions.size() << " predictions (" << failed << " failed) to "
        << path.string() << '\n';
    return 0;
  }

  int evaluate() const {
    const fs::path pred_path = out_path("predictions_" + split_name() + ".jsonl");
    if (!fs::exists(pred_path)) {
      throw MissingInputError("no predictions at " + pred_path.string() + "; run predict first");
    }
    const auto predictions = read_predictions(pred_path);
    const DatasetSplit gold = load(cfg.split);
    const TaskScore score = score_task(cfg.task, predictions, gold.records);
    const std::string table = format_table(score);
    {
      std::ofstream f(out_path("report_" + split_name() + ".json"), std::ios::binary | std::ios::trunc);
      f << score_json(score).dump(2) << '\n';
    }
    {
      std::ofstream f(out_path("report_" + split_name() + ".txt"), std::ios::binary | std::ios::trunc);
      f << table;
    }
    for (const auto& r : score.reports) {
      std::ofstream f(out_path("confusion_" + split_name() + "_" + r.name + ".csv"),
                      std::ios::binary | std::ios::trunc);
      f << confusion_csv(r.confusion);
      if (r.empty) err << "warning: nothing scorable for " << r.name << '\n';
    }
    out << table;
    return 0;
  }

  int report() const {
    const fs::path path = out_path("report_" + split_name() + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("no report at " + path.string() + "; run evaluate first");
    out << in.rdbuf();
    return 0;
  }
};

void add_common_options(CLI::App* sub, CliOverrides& o) {
  sub->add_option("--config", o.config, "JSON run configuration; flags override its values");
  sub->add_option("--ensemble-config", o.ensemble_config,
                  "JSON file with predictors, ensemble and task2 sections");
  sub->add_option("--task", o.task, "Task: 1 (hope/hate), 2 (emotion/offensive/hate), 3 (memes)");
  sub->add_option("--split", o.split, "Split to predict or evaluate: train, validation, test");
  sub->add_option("--fusion", o.fusion, "Fusion mode: text, image, avg, concat");
  sub->add_option("--detector", o.detector, "Task-3 detector: svm, mlp, llm, safety");
  sub->add_option("--oversample-factor", o.oversample_factor, "Repeat minority training records");
  sub->add_option("--seed", o.seed, "Seed for shuffling, initialization and SMO fallback");
  sub->add_option("--cache-dir", o.cache_dir, "Embedding cache directory");
  sub->add_option("--fixtures", o.fixtures, "Base directory for relative replay fixture paths");
  sub->add_option("--out", o.out, "Output directory for models, predictions and reports");
  sub->add_option("--train", o.train, "Training dataset (JSONL)");
  sub->add_option("--validation", o.validation, "Validation dataset (JSONL)");
  sub->add_option("--test", o.test, "Test dataset (JSONL)");
  sub->add_option("--max-in-flight", o.max_in_flight, "Concurrent records / provider requests");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            std::shared_ptr<Transport> transport) {
  CLI::App app{"Multi-modal moderation pipeline: embeddings, SVM/MLP detectors, LLM ensembles"};
  app.name("modpipe");
  app.require_subcommand(1);
  CliOverrides overrides;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"plan", "Validate the configuration and print the effective config"},
      {"embed", "Embed every configured split into the cache"},
      {"train-svm", "Train the RBF SVM (task 3 detector or task 1 text voter)"},
      {"train-mlp", "Train the dual-branch network (task 3)"},
      {"predict", "Run the task pipeline over --split and write predictions"},
      {"evaluate", "Score predictions of --split against gold labels"},
      {"report", "Print the report written by evaluate"},
  };
  for (const auto& [name, help] : commands) add_common_options(app.add_subcommand(name, help), overrides);

  SynthOptions synth_options;
  std::string synth_out = "fixtures";
  CLI::App* synth = app.add_subcommand("synth", "Write the synthetic fixture set");
  synth->add_option("--out", synth_out, "Destination directory");
  synth->add_option("--seed", synth_options.seed, "Generator seed");

  std::vector<std::string> argv_store{"modpipe"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\nrun 'modpipe --help' for the list of commands and flags\n";
    return exit_code(ErrorCategory::kUsage);
  }

  try {
    if (synth->parsed()) {
      write_synthetic_fixtures(synth_out, synth_options);
      out << "wrote synthetic fixtures to " << synth_out << '\n';
      return 0;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    const RunConfig cfg = plan_run(command, overrides);
    if (command == "plan") {
      out << cfg.to_json().dump(2) << '\n';
      return 0;
    }
    const Runner runner{cfg, transport, out, err};
    runner.snapshot();
    if (command == "embed") return runner.embed();
    if (command == "train-svm") return runner.train_svm();
    if (command == "train-mlp") return runner.train_mlp_cmd();
    if (command == "predict") return runner.predict();
    if (command == "evaluate") return runner.evaluate();
    if (command == "report") return runner.report();
    throw UsageError("unknown command '" + command + "'");
  } catch (const Error& e) {
    err << "error [" << to_string(e.category()) << "]: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    err << "error [internal]: " << e.what() << '\n';
    return exit_code(ErrorCategory::kInternal);
  }
}

}  // namespace modpipe
