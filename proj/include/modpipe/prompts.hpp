#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace modpipe {

enum class TemplateId {
  kTask1ThreeClass,
  kOffensiveYesNo,
  kHateNotHate,
  kEmotion12,
  kMemePrompt1,
  kMemePrompt2,
  kMemePrompt3,
  kHopeOrNot,
};

std::string_view to_string(TemplateId id);
std::optional<TemplateId> parse_template_id(std::string_view text);

/// One output label with the spellings a model may use for it.
struct LabelSpelling {
  std::string label;
  std::vector<std::string> aliases;
};

struct PromptTemplate {
  TemplateId id;
  std::string body;
  /// Labels the parser may return, in canonical dataset spelling.
  std::vector<LabelSpelling> labels;
  /// Whether the request must carry the record's image.
  bool needs_image = false;

  /// Placeholder replaced by the record text when present in the body.
  static constexpr std::string_view kTextPlaceholder = "<your text here>";

  bool has_placeholder() const { return body.find(kTextPlaceholder) != std::string::npos; }
  std::vector<std::string> expected_labels() const;
};

const PromptTemplate& prompt_template(TemplateId id);
std::span<const PromptTemplate> all_prompt_templates();

}  // namespace modpipe
