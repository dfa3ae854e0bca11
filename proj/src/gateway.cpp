#include "modpipe/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <set>
#include <sstream>
#include <vector>

#include "modpipe/digest.hpp"
#include "modpipe/error.hpp"

namespace modpipe {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::kRemoteChat: return "remote_chat";
    case PredictorKind::kRemoteVision: return "remote_vision";
    case PredictorKind::kSafetyAdapter: return "safety_adapter";
    case PredictorKind::kReplay: return "replay";
  }
  return "?";
}

std::optional<PredictorKind> parse_predictor_kind(std::string_view text) {
  if (text == "remote_chat") return PredictorKind::kRemoteChat;
  if (text == "remote_vision") return PredictorKind::kRemoteVision;
  if (text == "safety_adapter") return PredictorKind::kSafetyAdapter;
  if (text == "replay") return PredictorKind::kReplay;
  return std::nullopt;
}

std::string_view to_string(ParseMethod method) {
  switch (method) {
    case ParseMethod::kExact: return "exact";
    case ParseMethod::kFinalAnswerExtraction: return "final_answer_extraction";
    case ParseMethod::kNormalizedMatch: return "normalized_match";
  }
  return "?";
}

void PredictorSpec::validate() const {
  const std::string who = "predictor '" + name + "': ";
  switch (kind) {
    case PredictorKind::kRemoteChat:
    case PredictorKind::kRemoteVision:
      if (endpoint.empty()) throw ValidationError(who + "remote predictors need an endpoint");
      if (!template_id) throw ValidationError(who + "chat predictors need a template");
      break;
    case PredictorKind::kSafetyAdapter:
      if (endpoint.empty()) throw ValidationError(who + "safety adapter needs an endpoint");
      break;
    case PredictorKind::kReplay:
      if (fixture_path.empty()) throw ValidationError(who + "replay predictors need a fixture path");
      break;
  }
}

std::string PredictorSpec::fixture_key() const {
  return template_id ? std::string(to_string(*template_id)) : std::string(kSafetyFixtureKey);
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

ordered_json RequestPayload::to_json() const {
  ordered_json doc;
  doc["model"] = model_name;
  doc["template"] = std::string(to_string(template_id));
  ordered_json messages = ordered_json::array();
  if (!system.empty()) messages.push_back({{"role", "system"}, {"content", system}});
  messages.push_back({{"role", "user"}, {"content", user}});
  doc["messages"] = std::move(messages);
  if (image_ref) doc["image"] = *image_ref;
  return doc;
}

RequestPayload render(const PromptTemplate& tmpl, const Record& record,
                      std::string_view model_name) {
  if (tmpl.needs_image && !record.image_ref) {
    throw InputError("template " + std::string(to_string(tmpl.id)) + " needs an image, record '" +
                     record.id + "' has none");
  }
  if (!tmpl.needs_image && record.text.empty()) {
    throw InputError("template " + std::string(to_string(tmpl.id)) + " needs text, record '" +
                     record.id + "' has none");
  }
  RequestPayload payload{tmpl.id, std::string(model_name), {}, {}, std::nullopt};
  if (tmpl.has_placeholder()) {
    std::string body = tmpl.body;
    const auto pos = body.find(PromptTemplate::kTextPlaceholder);
    body.replace(pos, PromptTemplate::kTextPlaceholder.size(), record.text);
    payload.user = std::move(body);
  } else {
    payload.system = tmpl.body;
    payload.user = record.text;
  }
  if (tmpl.needs_image) payload.image_ref = record.image_ref;
  return payload;
}

// ---------------------------------------------------------------------------
// Label parsing
// ---------------------------------------------------------------------------

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

/// Lowercases ASCII, maps '_' and '-' to spaces and collapses whitespace.
std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (c == '_' || c == '-') c = ' ';
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
  }
  return out;
}

/// Drops leading/trailing whitespace, quotes, brackets and punctuation.
std::string strip_decoration(std::string_view text) {
  const auto decoration = [](unsigned char c) {
    return std::isspace(c) || (std::ispunct(c) && c != '_');
  };
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && decoration(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && decoration(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

std::optional<std::string> exact_match(std::string_view candidate, const PromptTemplate& tmpl) {
  const std::string norm = normalize(strip_decoration(candidate));
  if (norm.empty()) return std::nullopt;
  for (const auto& spelling : tmpl.labels) {
    if (normalize(spelling.label) == norm) return spelling.label;
    for (const auto& alias : spelling.aliases) {
      if (normalize(alias) == norm) return spelling.label;
    }
  }
  return std::nullopt;
}

struct Hit {
  std::size_t begin;
  std::size_t end;
  const std::string* label;
};

/// Labels whose spellings occur as whole words, ignoring occurrences nested
/// inside a longer match ("hate" inside "no hate").
std::set<std::string> contained_labels(std::string_view text, const PromptTemplate& tmpl) {
  const std::string hay = normalize(text);
  std::vector<Hit> hits;
  for (const auto& spelling : tmpl.labels) {
    std::vector<std::string> needles{normalize(spelling.label)};
    for (const auto& a : spelling.aliases) needles.push_back(normalize(a));
    for (const auto& needle : needles) {
      if (needle.empty()) continue;
      for (std::size_t pos = hay.find(needle); pos != std::string::npos;
           pos = hay.find(needle, pos + 1)) {
        const std::size_t end = pos + needle.size();
        const bool left_ok = pos == 0 || !is_word_byte(static_cast<unsigned char>(hay[pos - 1]));
        const bool right_ok = end == hay.size() || !is_word_byte(static_cast<unsigned char>(hay[end]));
        if (left_ok && right_ok) hits.push_back({pos, end, &spelling.label});
      }
    }
  }
  std::set<std::string> labels;
  for (const Hit& h : hits) {
    const bool nested = std::any_of(hits.begin(), hits.end(), [&](const Hit& o) {
      return o.begin <= h.begin && h.end <= o.end && (o.end - o.begin) > (h.end - h.begin);
    });
    if (!nested) labels.insert(*h.label);
  }
  return labels;
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

ParsedLabel parse_label(const RawResponse& response, const PromptTemplate& tmpl) {
  const std::string& raw = response.text;
  if (auto label = exact_match(raw, tmpl)) return {*label, ParseMethod::kExact};

  static constexpr std::string_view kMarker = "final answer:";
  const std::string lower = lowercase(raw);
  if (const auto pos = lower.rfind(kMarker); pos != std::string::npos) {
    std::string_view rest(raw);
    rest.remove_prefix(pos + kMarker.size());
    if (const auto eol = rest.find('\n'); eol != std::string_view::npos) rest = rest.substr(0, eol);
    if (auto label = exact_match(rest, tmpl)) return {*label, ParseMethod::kFinalAnswerExtraction};
    const auto within = contained_labels(rest, tmpl);
    if (within.size() == 1) return {*within.begin(), ParseMethod::kFinalAnswerExtraction};
  }

  const auto found = contained_labels(raw, tmpl);
  if (found.size() == 1) return {*found.begin(), ParseMethod::kNormalizedMatch};
  const std::string template_name(to_string(tmpl.id));
  if (found.empty()) {
    throw LabelParseError("no " + template_name + " label found in response", raw);
  }
  std::string listed;
  for (const auto& l : found) listed += (listed.empty() ? "" : ", ") + l;
  throw LabelParseError("ambiguous " + template_name + " response mentions " + listed, raw);
}

SafetyFlag safety_flag_from_payload(const json& payload) {
  const json* obj = &payload;
  if (payload.is_object() && payload.contains("results")) {
    const json& results = payload["results"];
    if (!results.is_array() || results.empty()) {
      throw ContractViolation("safety payload 'results' must be a non-empty array");
    }
    obj = &results[0];
  }
  if (!obj->is_object()) throw ContractViolation("safety payload must be an object");
  const auto flagged = obj->find("flagged");
  if (flagged == obj->end() || !flagged->is_boolean()) {
    throw ContractViolation("safety payload lacks a boolean 'flagged'");
  }
  const auto categories = obj->find("categories");
  if (categories == obj->end()) {
    if (flagged->get<bool>()) {
      throw ContractViolation("flagged safety payload lacks 'categories'");
    }
    return SafetyFlag::kNotFlagged;
  }
  if (!categories->is_object()) throw ContractViolation("safety 'categories' must be an object");
  const auto hate = categories->find("hate");
  if (hate == categories->end()) return SafetyFlag::kNotFlagged;
  if (!hate->is_boolean()) throw ContractViolation("safety category 'hate' must be boolean");
  return hate->get<bool>() ? SafetyFlag::kFlaggedHate : SafetyFlag::kNotFlagged;
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

ReplayStore ReplayStore::parse(std::istream& in, const std::string& source) {
  ReplayStore store;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json doc = json::parse(line);
      std::string key = doc.at("template").get<std::string>();
      std::string id = doc.at("record_id").get<std::string>();
      std::string response = doc.at("response").get<std::string>();
      auto existing = store.find(key, id);
      if (existing && *existing != response) {
        throw ValidationError("conflicting fixture for (" + key + ", " + id + ")");
      }
      store.insert(std::move(key), std::move(id), std::move(response));
    } catch (const json::exception& e) {
      throw ParseError(source + ": " + e.what(), line_number);
    }
  }
  return store;
}

ReplayStore ReplayStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open fixture file " + path.string());
  return parse(in, path.string());
}

std::optional<std::string> ReplayStore::find(std::string_view template_key,
                                             std::string_view record_id) const {
  auto it = entries_.find({std::string(template_key), std::string(record_id)});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ReplayStore::insert(std::string template_key, std::string record_id, std::string response) {
  entries_[{std::move(template_key), std::move(record_id)}] = std::move(response);
}

FixtureRecorder::FixtureRecorder(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::app) {
  if (!out_) throw InputError("cannot open fixture recorder file " + path.string());
}

void FixtureRecorder::append(std::string_view template_key, std::string_view record_id,
                             std::string_view response) {
  ordered_json line;
  line["template"] = std::string(template_key);
  line["record_id"] = std::string(record_id);
  line["response"] = std::string(response);
  std::lock_guard lock(mutex_);
  out_ << line.dump() << '\n';
  out_.flush();
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Transport> transport, RetryPolicy retry)
    : transport_(std::move(transport)), retry_(retry) {}

Transport& Gateway::transport() const {
  std::lock_guard lock(mutex_);
  if (!transport_) transport_ = std::make_shared<HttpTransport>();
  return *transport_;
}

std::shared_ptr<const ReplayStore> Gateway::replay_store(const std::filesystem::path& path) const {
  std::lock_guard lock(mutex_);
  auto it = stores_.find(path);
  if (it != stores_.end()) return it->second;
  auto store = std::make_shared<const ReplayStore>(ReplayStore::load(path));
  stores_.emplace(path, store);
  return store;
}

std::string Gateway::read_image_base64(const std::string& image_ref) const {
  std::filesystem::path path(image_ref);
  if (path.is_relative() && !image_root_.empty()) path = image_root_ / path;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot resolve image '" + image_ref + "'");
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return base64_encode(bytes.str());
}

RawResponse Gateway::respond(const Record& record, const PredictorSpec& predictor) const {
  predictor.validate();
  if (predictor.kind == PredictorKind::kReplay) {
    const auto store = replay_store(predictor.fixture_path);
    auto text = store->find(predictor.fixture_key(), record.id);
    if (!text) {
      throw MissingFixtureError("no fixture for (" + predictor.fixture_key() + ", " + record.id +
                                ") in " + predictor.fixture_path.string());
    }
    return {*std::move(text), 0.0, 200};
  }

  ordered_json body;
  if (predictor.kind == PredictorKind::kSafetyAdapter) {
    body["model"] = predictor.model_name;
    ordered_json input = ordered_json::array();
    if (!record.text.empty()) input.push_back({{"type", "text"}, {"text", record.text}});
    if (record.image_ref) {
      input.push_back({{"type", "image"}, {"image_base64", read_image_base64(*record.image_ref)}});
    }
    body["input"] = std::move(input);
  } else {
    const RequestPayload payload =
        render(prompt_template(*predictor.template_id), record, predictor.model_name);
    body = payload.to_json();
    if (predictor.kind == PredictorKind::kRemoteVision && payload.image_ref) {
      body["image_base64"] = read_image_base64(*payload.image_ref);
    }
  }
  Headers headers;
  if (auto key = credential_from_env(predictor.api_key_env); !key.empty()) {
    headers.emplace_back("Authorization", "Bearer " + key);
  }
  const auto start = std::chrono::steady_clock::now();
  const HttpResponse http =
      post_with_retries(transport(), predictor.endpoint, body.dump(), headers, retry_);
  const double latency =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  std::string text;
  if (predictor.kind == PredictorKind::kSafetyAdapter) {
    text = http.body;
  } else {
    try {
      const json reply = json::parse(http.body);
      text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw ContractViolation("chat provider reply lacks choices[0].message.content");
    }
  }
  if (recorder_) recorder_->append(predictor.fixture_key(), record.id, text);
  return {std::move(text), latency, http.status};
}

ParsedLabel Gateway::classify(const Record& record, const PredictorSpec& predictor) const {
  if (!predictor.template_id) {
    throw ValidationError("predictor '" + predictor.name + "' has no prompt template");
  }
  const PromptTemplate& tmpl = prompt_template(*predictor.template_id);
  if (predictor.kind == PredictorKind::kReplay) {
    // Replay never transmits, but the record must still be renderable.
    render(tmpl, record, predictor.model_name);
  }
  return parse_label(respond(record, predictor), tmpl);
}

SafetyFlag Gateway::safety_adapter_flag(const Record& record, const PredictorSpec& adapter) const {
  const RawResponse raw = respond(record, adapter);
  json payload;
  try {
    payload = json::parse(raw.text);
  } catch (const json::parse_error&) {
    throw ContractViolation("safety adapter returned a non-JSON payload for '" + record.id + "'");
  }
  return safety_flag_from_payload(payload);
}

}  // namespace modpipe
