#include "modpipe/labels.hpp"

namespace modpipe {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view text) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == text) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Task task) {
  switch (task) {
    case Task::kHopeHate: return "1";
    case Task::kMultiTask: return "2";
    case Task::kMeme: return "3";
  }
  return "?";
}

std::optional<Task> parse_task(std::string_view text) {
  if (text == "1") return Task::kHopeHate;
  if (text == "2") return Task::kMultiTask;
  if (text == "3") return Task::kMeme;
  return std::nullopt;
}

std::string_view to_string(HopeLabel v) { return kHopeLabelNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Emotion v) { return kEmotionNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Offensive v) { return kOffensiveNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(TextHate v) { return kTextHateNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(MemeHate v) { return kMemeHateNames[static_cast<std::size_t>(v)]; }

std::optional<HopeLabel> parse_hope_label(std::string_view text) {
  return lookup<HopeLabel>(kHopeLabelNames, text);
}

std::optional<Emotion> parse_emotion(std::string_view text) {
  if (text == kEmotionTrustAlias) return Emotion::kTrust;
  return lookup<Emotion>(kEmotionNames, text);
}

std::optional<Offensive> parse_offensive(std::string_view text) {
  return lookup<Offensive>(kOffensiveNames, text);
}

std::optional<TextHate> parse_text_hate(std::string_view text) {
  return lookup<TextHate>(kTextHateNames, text);
}

std::optional<MemeHate> parse_meme_hate(std::string_view text) {
  return lookup<MemeHate>(kMemeHateNames, text);
}

namespace {
constexpr std::array<std::string_view, 5> kFieldNames{"task1", "emotion", "offensive", "hate_text",
                                                      "meme_hate"};
}

std::string_view to_string(LabelField field) {
  return kFieldNames[static_cast<std::size_t>(field)];
}

std::optional<LabelField> parse_label_field(std::string_view text) {
  return lookup<LabelField>(kFieldNames, text);
}

}  // namespace modpipe
