#include "modpipe/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "modpipe/error.hpp"
#include "modpipe/labels.hpp"
#include "modpipe/parallel.hpp"

namespace modpipe {

using nlohmann::json;
using nlohmann::ordered_json;

GatewayPredictor::GatewayPredictor(std::shared_ptr<const Gateway> gateway, PredictorSpec spec)
    : gateway_(std::move(gateway)), spec_(std::move(spec)) {
  if (!gateway_) throw ValidationError("gateway predictor '" + spec_.name + "' has no gateway");
  spec_.validate();
  if (!spec_.template_id) {
    throw ValidationError("gateway predictor '" + spec_.name + "' needs a prompt template");
  }
}

std::string GatewayPredictor::predict(const Record& record) const {
  return gateway_->classify(record, spec_).label;
}

SafetyPredictor::SafetyPredictor(std::shared_ptr<const Gateway> gateway, PredictorSpec spec,
                                 std::string flagged_label, std::string clear_label)
    : gateway_(std::move(gateway)),
      spec_(std::move(spec)),
      flagged_label_(std::move(flagged_label)),
      clear_label_(std::move(clear_label)) {
  if (!gateway_) throw ValidationError("safety predictor '" + spec_.name + "' has no gateway");
  spec_.validate();
}

std::string SafetyPredictor::predict(const Record& record) const {
  return gateway_->safety_adapter_flag(record, spec_) == SafetyFlag::kFlaggedHate ? flagged_label_
                                                                                   : clear_label_;
}

namespace {

std::optional<EmbeddingVector> embed_modality(const Embedder& embedder, const Record& record,
                                              Modality modality,
                                              const std::optional<std::string>& leak) {
  if (modality == Modality::kText) {
    if (record.text.empty()) return std::nullopt;
    return embedder.embed(record.text, Modality::kText, leak);
  }
  if (!record.image_ref) return std::nullopt;
  return embedder.embed(*record.image_ref, Modality::kImage, leak);
}

}  // namespace

Eigen::VectorXd fused_embedding(const Embedder& embedder, const Record& record, Task task,
                                FusionMode mode) {
  const auto leak = select_label(primary_field(task))(record);
  std::optional<EmbeddingVector> text;
  std::optional<EmbeddingVector> image;
  if (needs_text(mode)) text = embed_modality(embedder, record, Modality::kText, leak);
  if (needs_image(mode)) image = embed_modality(embedder, record, Modality::kImage, leak);
  try {
    return fuse(text, image, mode);
  } catch (const InputError& e) {
    throw InputError("record '" + record.id + "': " + e.what());
  }
}

Eigen::MatrixXd fused_features(const Embedder& embedder, std::span<const Record> records,
                               Task task, FusionMode mode, std::size_t max_in_flight) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(records.size()), fused_dim(mode));
  parallel_for(records.size(), max_in_flight, [&](std::size_t i) {
    X.row(static_cast<Eigen::Index>(i)) = fused_embedding(embedder, records[i], task, mode);
  });
  return X;
}

MlpData mlp_features(const Embedder& embedder, std::span<const Record> records, Task task,
                     std::string_view positive_label, std::size_t max_in_flight) {
  const auto n = static_cast<Eigen::Index>(records.size());
  const LabelSelector selector = select_label(primary_field(task));
  MlpData data{Eigen::MatrixXd(kEmbeddingDim, n), Eigen::MatrixXd(kEmbeddingDim, n),
               Eigen::VectorXd::Zero(n)};
  parallel_for(records.size(), max_in_flight, [&](std::size_t i) {
    const Record& r = records[i];
    const auto label = selector(r);
    if (!label) throw InputError("record '" + r.id + "' has no gold label for training");
    const auto col = static_cast<Eigen::Index>(i);
    data.image.col(col) = fused_embedding(embedder, r, task, FusionMode::kImageOnly);
    data.text.col(col) = fused_embedding(embedder, r, task, FusionMode::kTextOnly);
    data.labels[col] = *label == positive_label ? 1.0 : 0.0;
  });
  return data;
}

SvmPredictor::SvmPredictor(std::string name, std::shared_ptr<const Embedder> embedder,
                           SvmModel model, Task task, FusionMode mode)
    : name_(std::move(name)),
      embedder_(std::move(embedder)),
      model_(std::move(model)),
      task_(task),
      mode_(mode) {
  if (model_.dim() != fused_dim(mode_)) {
    throw ValidationError("svm '" + name_ + "' expects " + std::to_string(model_.dim()) +
                          "-dim input but fusion mode " + std::string(to_string(mode_)) +
                          " yields " + std::to_string(fused_dim(mode_)));
  }
}

std::string SvmPredictor::predict(const Record& record) const {
  return model_.predict(fused_embedding(*embedder_, record, task_, mode_));
}

OneVsRestPredictor::OneVsRestPredictor(std::string name, std::shared_ptr<const Embedder> embedder,
                                       OneVsRestSvm model, Task task, FusionMode mode)
    : name_(std::move(name)),
      embedder_(std::move(embedder)),
      model_(std::move(model)),
      task_(task),
      mode_(mode) {}

std::string OneVsRestPredictor::predict(const Record& record) const {
  return model_.predict(fused_embedding(*embedder_, record, task_, mode_));
}

MlpPredictor::MlpPredictor(std::string name, std::shared_ptr<const Embedder> embedder,
                           MlpModel model, Task task, std::string positive_label,
                           std::string negative_label)
    : name_(std::move(name)),
      embedder_(std::move(embedder)),
      model_(std::move(model)),
      task_(task),
      positive_label_(std::move(positive_label)),
      negative_label_(std::move(negative_label)) {}

std::string MlpPredictor::predict(const Record& record) const {
  const Eigen::VectorXd image = fused_embedding(*embedder_, record, task_, FusionMode::kImageOnly);
  const Eigen::VectorXd text = fused_embedding(*embedder_, record, task_, FusionMode::kTextOnly);
  return forward(model_, image, text) >= 0.5 ? positive_label_ : negative_label_;
}

TablePredictor::TablePredictor(std::string name, std::map<std::string, std::string> answers,
                               std::string family)
    : name_(std::move(name)), answers_(std::move(answers)), family_(std::move(family)) {}

std::string TablePredictor::predict(const Record& record) const {
  auto it = answers_.find(record.id);
  if (it == answers_.end()) {
    throw MissingFixtureError("predictor '" + name_ + "' has no answer for '" + record.id + "'");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Task orchestration
// ---------------------------------------------------------------------------

std::string majority_vote(const std::array<std::string, 3>& votes,
                          const std::array<std::size_t, 3>& priority) {
  if (votes[0] == votes[1] || votes[0] == votes[2]) return votes[0];
  if (votes[1] == votes[2]) return votes[1];
  return votes.at(priority[0]);
}

void EnsembleSpec::validate() const {
  for (std::size_t i = 0; i < voters.size(); ++i) {
    if (!voters[i]) throw ValidationError("ensemble voter " + std::to_string(i + 1) + " is missing");
  }
  std::array<std::size_t, 3> sorted = priority;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != std::array<std::size_t, 3>{0, 1, 2}) {
    throw ValidationError("ensemble priority must be a permutation of the three voters");
  }
}

namespace {

/// Runs one stage; on failure marks the prediction failed and returns nullopt.
std::optional<std::string> run_stage(Prediction& p, const Record& record, std::string_view stage,
                                     const LabelPredictor& predictor) {
  try {
    std::string label = predictor.predict(record);
    p.provenance.push_back({std::string(stage), predictor.name(), label});
    return label;
  } catch (const std::exception& e) {
    p.failed = true;
    p.error = "stage " + std::string(stage) + " (" + predictor.name() + "): " + e.what();
    return std::nullopt;
  }
}

void fail(Prediction& p, std::string message) {
  p.failed = true;
  p.error = std::move(message);
}

}  // namespace

Prediction run_task1(const Record& record, const EnsembleSpec& ensemble) {
  ensemble.validate();
  Prediction p{record.id, Task::kHopeHate, {}, {}, false, {}};
  std::array<std::string, 3> votes;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string stage = "vote" + std::to_string(i + 1);
    auto label = run_stage(p, record, stage, *ensemble.voters[i]);
    if (!label) return p;
    if (!parse_hope_label(*label)) {
      fail(p, "stage " + stage + ": label '" + *label + "' is not a task-1 label");
      return p;
    }
    votes[i] = *std::move(label);
  }
  std::string result = majority_vote(votes, ensemble.priority);
  p.provenance.push_back({"majority", "ensemble", result});
  if (result == to_string(HopeLabel::kNotApplicable) && ensemble.rescue) {
    auto answer = run_stage(p, record, "rescue", *ensemble.rescue);
    if (!answer) return p;
    if (*answer == to_string(HopeLabel::kHope)) result = *answer;
  }
  p.labels[std::string(kTask1Key)] = result;
  return p;
}

Prediction run_task2(const Record& record, const Task2Predictors& predictors) {
  if (!predictors.emotion || !predictors.offensive || !predictors.hate) {
    throw ValidationError("task 2 needs emotion, offensive and hate predictors");
  }
  Prediction p{record.id, Task::kMultiTask, {}, {}, false, {}};
  auto emotion = run_stage(p, record, "emotion", *predictors.emotion);
  if (!emotion) return p;
  const auto canonical_emotion = parse_emotion(*emotion);
  if (!canonical_emotion) {
    fail(p, "stage emotion: label '" + *emotion + "' is outside the emotion set");
    return p;
  }
  auto offensive = run_stage(p, record, "offensive", *predictors.offensive);
  if (!offensive) return p;
  const auto off = parse_offensive(*offensive);
  if (!off) {
    fail(p, "stage offensive: label '" + *offensive + "' is not yes/no");
    return p;
  }
  std::optional<std::string> hate;
  if (*off == Offensive::kYes) {
    hate = run_stage(p, record, "hate", *predictors.hate);
    if (!hate) return p;
    if (!parse_text_hate(*hate)) {
      fail(p, "stage hate: label '" + *hate + "' is not hate/not_hate");
      return p;
    }
  }
  p.labels[std::string(kEmotionKey)] = std::string(to_string(*canonical_emotion));
  p.labels[std::string(kOffensiveKey)] = std::string(to_string(*off));
  p.labels[std::string(kHateKey)] = hate;
  return p;
}

Prediction run_task3(const Record& record, const LabelPredictor& detector) {
  Prediction p{record.id, Task::kMeme, {}, {}, false, {}};
  auto label = run_stage(p, record, std::string(detector.family()), detector);
  if (!label) return p;
  if (!parse_meme_hate(*label)) {
    fail(p, "detector " + detector.name() + ": label '" + *label + "' is not hateful/not_hateful");
    return p;
  }
  p.labels[std::string(kMemeKey)] = *label;
  return p;
}

std::vector<Prediction> run_records(std::span<const Record> records,
                                    const std::function<Prediction(const Record&)>& fn,
                                    std::size_t max_workers) {
  std::vector<Prediction> out(records.size());
  parallel_for(records.size(), max_workers, [&](std::size_t i) { out[i] = fn(records[i]); });
  std::sort(out.begin(), out.end(),
            [](const Prediction& a, const Prediction& b) { return a.record_id < b.record_id; });
  return out;
}

// ---------------------------------------------------------------------------
// Prediction files
// ---------------------------------------------------------------------------

std::string serialize_prediction(const Prediction& prediction) {
  ordered_json doc;
  doc["id"] = prediction.record_id;
  doc["task"] = static_cast<int>(prediction.task);
  ordered_json labels = ordered_json::object();
  for (const auto& [key, value] : prediction.labels) {
    labels[key] = value ? ordered_json(*value) : ordered_json(nullptr);
  }
  doc["labels"] = std::move(labels);
  ordered_json provenance = ordered_json::array();
  for (const auto& entry : prediction.provenance) {
    provenance.push_back(
        {{"stage", entry.stage}, {"predictor", entry.predictor}, {"label", entry.label}});
  }
  doc["provenance"] = std::move(provenance);
  doc["failed"] = prediction.failed;
  if (prediction.failed) doc["error"] = prediction.error;
  return doc.dump();
}

Prediction parse_prediction(std::string_view line, std::size_t line_number) {
  try {
    const json doc = json::parse(line);
    Prediction p;
    p.record_id = doc.at("id").get<std::string>();
    const auto task = parse_task(std::to_string(doc.at("task").get<int>()));
    if (!task) throw ParseError("unknown task in prediction '" + p.record_id + "'", line_number);
    p.task = *task;
    for (const auto& [key, value] : doc.at("labels").items()) {
      p.labels[key] = value.is_null() ? std::nullopt : std::optional(value.get<std::string>());
    }
    for (const auto& entry : doc.at("provenance")) {
      p.provenance.push_back({entry.at("stage").get<std::string>(),
                              entry.at("predictor").get<std::string>(),
                              entry.at("label").get<std::string>()});
    }
    p.failed = doc.value("failed", false);
    p.error = doc.value("error", std::string());
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("prediction: ") + e.what(), line_number);
  }
}

void write_predictions(std::ostream& out, std::span<const Prediction> predictions) {
  for (const auto& p : predictions) out << serialize_prediction(p) << '\n';
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write predictions to " + path.string());
  write_predictions(out, predictions);
}

std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_prediction(line, number));
  }
  return out;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("prediction file " + path.string() + " does not exist");
  return read_predictions(in);
}

}  // namespace modpipe
