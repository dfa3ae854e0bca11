#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace modpipe {

/// The three moderation tasks. Numeric values match the `--task` flag.
enum class Task { kHopeHate = 1, kMultiTask = 2, kMeme = 3 };

std::string_view to_string(Task task);
/// Accepts "1"/"2"/"3".
std::optional<Task> parse_task(std::string_view text);

enum class HopeLabel { kHope, kHate, kNotApplicable };
enum class Emotion {
  kNeutral,
  kAnger,
  kAnticipation,
  kDisgust,
  kFear,
  kJoy,
  kLove,
  kOptimism,
  kPessimism,
  kSadness,
  kSurprise,
  kTrust,
};
enum class Offensive { kYes, kNo };
enum class TextHate { kHate, kNotHate };
enum class MemeHate { kHateful, kNotHateful };

inline constexpr std::array<std::string_view, 3> kHopeLabelNames{"hope", "hate", "not_applicable"};
inline constexpr std::array<std::string_view, 12> kEmotionNames{
    "neutral", "anger",    "anticipation", "disgust", "fear",     "joy",
    "love",    "optimism", "pessimism",    "sadness", "surprise", "trust"};
inline constexpr std::array<std::string_view, 2> kOffensiveNames{"yes", "no"};
inline constexpr std::array<std::string_view, 2> kTextHateNames{"hate", "not_hate"};
inline constexpr std::array<std::string_view, 2> kMemeHateNames{"hateful", "not_hateful"};

/// Accepted on input as a synonym for "trust".
inline constexpr std::string_view kEmotionTrustAlias = "confidence";

std::string_view to_string(HopeLabel v);
std::string_view to_string(Emotion v);
std::string_view to_string(Offensive v);
std::string_view to_string(TextHate v);
std::string_view to_string(MemeHate v);

std::optional<HopeLabel> parse_hope_label(std::string_view text);
std::optional<Emotion> parse_emotion(std::string_view text);
std::optional<Offensive> parse_offensive(std::string_view text);
std::optional<TextHate> parse_text_hate(std::string_view text);
std::optional<MemeHate> parse_meme_hate(std::string_view text);

/// Names one gold-label slot of a record.
enum class LabelField { kTask1, kEmotion, kOffensive, kHateText, kMemeHate };

std::string_view to_string(LabelField field);
std::optional<LabelField> parse_label_field(std::string_view text);

}  // namespace modpipe
