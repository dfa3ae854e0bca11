#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "modpipe/corpus.hpp"
#include "modpipe/embeddings.hpp"
#include "modpipe/fusion.hpp"
#include "modpipe/gateway.hpp"
#include "modpipe/mlp.hpp"
#include "modpipe/svm.hpp"

namespace modpipe {

/// Anything that maps a record to one label string. Implementations throw on
/// failure and never substitute a default label.
class LabelPredictor {
 public:
  virtual ~LabelPredictor() = default;
  virtual const std::string& name() const = 0;
  /// Detector family recorded in provenance, e.g. "llm" or "svm".
  virtual std::string_view family() const = 0;
  virtual std::string predict(const Record& record) const = 0;
};

using PredictorPtr = std::shared_ptr<const LabelPredictor>;

/// Chat or vision model behind the gateway (live or replayed).
class GatewayPredictor final : public LabelPredictor {
 public:
  GatewayPredictor(std::shared_ptr<const Gateway> gateway, PredictorSpec spec);
  const std::string& name() const override { return spec_.name; }
  std::string_view family() const override { return "llm"; }
  std::string predict(const Record& record) const override;

 private:
  std::shared_ptr<const Gateway> gateway_;
  PredictorSpec spec_;
};

/// Safety classifier; only the hate category maps to `flagged_label`.
class SafetyPredictor final : public LabelPredictor {
 public:
  SafetyPredictor(std::shared_ptr<const Gateway> gateway, PredictorSpec spec,
                  std::string flagged_label = "hateful", std::string clear_label = "not_hateful");
  const std::string& name() const override { return spec_.name; }
  std::string_view family() const override { return "safety_adapter"; }
  std::string predict(const Record& record) const override;

 private:
  std::shared_ptr<const Gateway> gateway_;
  PredictorSpec spec_;
  std::string flagged_label_;
  std::string clear_label_;
};

/// Embeds the record's modalities for `task`; the gold label of the task's
/// primary field feeds the stub's label-leak mode.
Eigen::VectorXd fused_embedding(const Embedder& embedder, const Record& record, Task task,
                                FusionMode mode);

/// Rows are fused embeddings of `records`, computed with bounded concurrency.
Eigen::MatrixXd fused_features(const Embedder& embedder, std::span<const Record> records,
                               Task task, FusionMode mode, std::size_t max_in_flight = 4);

/// Image/text pairs as columns plus binary labels (1 = `positive_label`).
MlpData mlp_features(const Embedder& embedder, std::span<const Record> records, Task task,
                     std::string_view positive_label, std::size_t max_in_flight = 4);

/// Binary SVM over fused embeddings.
class SvmPredictor final : public LabelPredictor {
 public:
  SvmPredictor(std::string name, std::shared_ptr<const Embedder> embedder, SvmModel model,
               Task task, FusionMode mode);
  const std::string& name() const override { return name_; }
  std::string_view family() const override { return "svm"; }
  std::string predict(const Record& record) const override;
  const SvmModel& model() const noexcept { return model_; }

 private:
  std::string name_;
  std::shared_ptr<const Embedder> embedder_;
  SvmModel model_;
  Task task_;
  FusionMode mode_;
};

/// One-vs-rest SVM over fused embeddings (the text-embedding task-1 voter).
class OneVsRestPredictor final : public LabelPredictor {
 public:
  OneVsRestPredictor(std::string name, std::shared_ptr<const Embedder> embedder,
                     OneVsRestSvm model, Task task, FusionMode mode = FusionMode::kTextOnly);
  const std::string& name() const override { return name_; }
  std::string_view family() const override { return "svm"; }
  std::string predict(const Record& record) const override;

 private:
  std::string name_;
  std::shared_ptr<const Embedder> embedder_;
  OneVsRestSvm model_;
  Task task_;
  FusionMode mode_;
};

/// Dual-branch network; p >= 0.5 maps to `positive_label`.
class MlpPredictor final : public LabelPredictor {
 public:
  MlpPredictor(std::string name, std::shared_ptr<const Embedder> embedder, MlpModel model,
               Task task, std::string positive_label, std::string negative_label);
  const std::string& name() const override { return name_; }
  std::string_view family() const override { return "mlp"; }
  std::string predict(const Record& record) const override;

 private:
  std::string name_;
  std::shared_ptr<const Embedder> embedder_;
  MlpModel model_;
  Task task_;
  std::string positive_label_;
  std::string negative_label_;
};

/// Fixed answers keyed by record id; a missing id throws MissingFixtureError.
class TablePredictor final : public LabelPredictor {
 public:
  TablePredictor(std::string name, std::map<std::string, std::string> answers,
                 std::string family = "table");
  const std::string& name() const override { return name_; }
  std::string_view family() const override { return family_; }
  std::string predict(const Record& record) const override;

 private:
  std::string name_;
  std::map<std::string, std::string> answers_;
  std::string family_;
};

struct ProvenanceEntry {
  std::string stage;
  std::string predictor;
  std::string label;
  bool operator==(const ProvenanceEntry&) const = default;
};

/// Label keys: "task1"; "emotion", "offensive", "hate"; "meme_hate".
struct Prediction {
  std::string record_id;
  Task task = Task::kHopeHate;
  /// nullopt encodes the task-2 `undefined` hate label.
  std::map<std::string, std::optional<std::string>> labels;
  std::vector<ProvenanceEntry> provenance;
  bool failed = false;
  std::string error;
  bool operator==(const Prediction&) const = default;
};

inline constexpr std::string_view kTask1Key = "task1";
inline constexpr std::string_view kEmotionKey = "emotion";
inline constexpr std::string_view kOffensiveKey = "offensive";
inline constexpr std::string_view kHateKey = "hate";
inline constexpr std::string_view kMemeKey = "meme_hate";

/// Label with at least two votes; when all three differ, the vote of
/// `priority[0]` (a voter index) wins.
std::string majority_vote(const std::array<std::string, 3>& votes,
                          const std::array<std::size_t, 3>& priority = {0, 1, 2});

struct EnsembleSpec {
  std::array<PredictorPtr, 3> voters;
  std::array<std::size_t, 3> priority{0, 1, 2};
  /// Binary hope / not_applicable predictor consulted on not_applicable.
  PredictorPtr rescue;

  /// Throws ValidationError on a missing voter or a non-permutation priority.
  void validate() const;
};

Prediction run_task1(const Record& record, const EnsembleSpec& ensemble);

struct Task2Predictors {
  PredictorPtr emotion;
  PredictorPtr offensive;
  PredictorPtr hate;
};

/// Hate is asked only when offensive == yes, otherwise it is `undefined`.
Prediction run_task2(const Record& record, const Task2Predictors& predictors);

Prediction run_task3(const Record& record, const LabelPredictor& detector);

/// Applies `fn` to every record with at most `max_workers` in flight and
/// returns the predictions sorted by record id.
std::vector<Prediction> run_records(std::span<const Record> records,
                                    const std::function<Prediction(const Record&)>& fn,
                                    std::size_t max_workers = 4);

/// One line of the prediction file, keys in a fixed order.
std::string serialize_prediction(const Prediction& prediction);
Prediction parse_prediction(std::string_view line, std::size_t line_number = 0);

void write_predictions(std::ostream& out, std::span<const Prediction> predictions);
void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions);
std::vector<Prediction> read_predictions(std::istream& in);
/// Throws MissingInputError when the file does not exist.
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

}  // namespace modpipe
