#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "modpipe/corpus.hpp"
#include "modpipe/prompts.hpp"
#include "modpipe/transport.hpp"

namespace modpipe {

enum class PredictorKind { kRemoteChat, kRemoteVision, kSafetyAdapter, kReplay };

std::string_view to_string(PredictorKind kind);
std::optional<PredictorKind> parse_predictor_kind(std::string_view text);

/// Fixture key used for safety-adapter payloads.
inline constexpr std::string_view kSafetyFixtureKey = "safety_adapter";

struct PredictorSpec {
  std::string name;
  PredictorKind kind = PredictorKind::kReplay;
  std::string endpoint;
  std::string model_name;
  /// Required for chat/vision and for replayed chat predictors.
  std::optional<TemplateId> template_id;
  /// Replay fixture file (replay kind only).
  std::filesystem::path fixture_path;
  std::string api_key_env;

  /// Throws ValidationError when required fields are missing.
  void validate() const;
  /// Fixture key: the template id, or kSafetyFixtureKey when templateless.
  std::string fixture_key() const;
};

struct RawResponse {
  std::string text;
  double latency_ms = 0.0;
  int status = 200;
};

enum class ParseMethod { kExact, kFinalAnswerExtraction, kNormalizedMatch };

std::string_view to_string(ParseMethod method);

struct ParsedLabel {
  std::string label;
  ParseMethod method = ParseMethod::kExact;
};

/// Request sent to a chat/vision provider.
struct RequestPayload {
  TemplateId template_id;
  std::string model_name;
  std::string system;  // empty when the template embeds the text itself
  std::string user;
  std::optional<std::string> image_ref;

  /// Stable serialization (fixed key order).
  nlohmann::ordered_json to_json() const;
};

/// Substitutes the record into the template. Throws InputError when the
/// template needs a modality the record lacks.
RequestPayload render(const PromptTemplate& tmpl, const Record& record,
                      std::string_view model_name = {});

/// Maps free text onto one expected label: exact match, then the text after
/// the last "Final Answer:" marker, then unique containment of a label
/// spelling. Throws LabelParseError on zero or ambiguous matches.
ParsedLabel parse_label(const RawResponse& response, const PromptTemplate& tmpl);

enum class SafetyFlag { kFlaggedHate, kNotFlagged };

/// Interprets a moderation payload: only a true `categories.hate` counts.
/// Accepts the object at top level or as `results[0]`.
/// Throws ContractViolation on a malformed payload.
SafetyFlag safety_flag_from_payload(const nlohmann::json& payload);

/// Line-delimited {"template", "record_id", "response"} fixtures.
class ReplayStore {
 public:
  static ReplayStore load(const std::filesystem::path& path);
  static ReplayStore parse(std::istream& in, const std::string& source = "<stream>");

  std::optional<std::string> find(std::string_view template_key, std::string_view record_id) const;
  void insert(std::string template_key, std::string record_id, std::string response);
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::pair<std::string, std::string>, std::string>& entries() const {
    return entries_;
  }

 private:
  std::map<std::pair<std::string, std::string>, std::string> entries_;
};

/// Appends fixture lines as live responses arrive. Appends are serialized.
class FixtureRecorder {
 public:
  explicit FixtureRecorder(const std::filesystem::path& path);
  void append(std::string_view template_key, std::string_view record_id,
              std::string_view response);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

/// Renders prompts, reaches providers (or fixtures) and parses labels.
/// Never invents a label: every failure surfaces as an exception.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Transport> transport = nullptr, RetryPolicy retry = {});

  void set_recorder(std::shared_ptr<FixtureRecorder> recorder) { recorder_ = std::move(recorder); }
  void set_image_root(std::filesystem::path root) { image_root_ = std::move(root); }

  /// Provider text for `record`: a fixture in replay mode, else a live call.
  RawResponse respond(const Record& record, const PredictorSpec& predictor) const;

  ParsedLabel classify(const Record& record, const PredictorSpec& predictor) const;

  SafetyFlag safety_adapter_flag(const Record& record, const PredictorSpec& adapter) const;

 private:
  std::shared_ptr<const ReplayStore> replay_store(const std::filesystem::path& path) const;
  Transport& transport() const;
  std::string read_image_base64(const std::string& image_ref) const;

  mutable std::shared_ptr<Transport> transport_;
  RetryPolicy retry_;
  std::shared_ptr<FixtureRecorder> recorder_;
  std::filesystem::path image_root_;
  mutable std::mutex mutex_;
  mutable std::map<std::filesystem::path, std::shared_ptr<const ReplayStore>> stores_;
};

}  // namespace modpipe
