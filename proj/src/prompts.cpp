#include "modpipe/prompts.hpp"

#include <array>

namespace modpipe {

namespace {

constexpr std::array<std::string_view, 8> kTemplateNames{
    "task1_3class", "offensive_yes_no", "hate_not_hate", "emotion_12",
    "meme_prompt1", "meme_prompt2",     "meme_prompt3",  "hope_or_not"};

const std::vector<LabelSpelling> kMemeLabels{
    {"hateful", {"hate", "hateful"}},
    {"not_hateful", {"no hate", "not hate", "not hateful", "no hateful"}},
};

std::vector<PromptTemplate> build_templates() {
  std::vector<PromptTemplate> t;

  t.push_back({TemplateId::kTask1ThreeClass,
               "Classify each text into one of the three categories 'hope','hate',or "
               "'not_applicable'",
               {{"hope", {"hope"}}, {"hate", {"hate"}}, {"not_applicable", {"not applicable"}}},
               false});

  t.push_back({TemplateId::kOffensiveYesNo,
               "You are an expert in offensive language detection.\n"
               "Carefully read the input text and determine whether it is offensive.\n"
               "Respond with only one word, either \"yes\" if the text is offensive, or \"no\" "
               "if it is not.\n"
               "Text: \"<your text here>\"\n"
               "Answer:",
               {{"yes", {"yes"}}, {"no", {"no"}}},
               false});

  t.push_back({TemplateId::kHateNotHate,
               "Classify each text into one of the two categories 'hate', or 'not_hate'",
               {{"hate", {"hate"}}, {"not_hate", {"not hate"}}},
               false});

  t.push_back({TemplateId::kEmotion12,
               "You are an expert in fine-grained emotion classification.\n"
               "Given a short piece of text, your task is to classify the **dominant emotion** "
               "expressed in the text.\n"
               "Use **only one word** from the following list of predefined emotion "
               "categories:\n"
               "[anger, disgust, neutral, love, joy, anticipation, optimism, sadness, confidence, "
               "pessimism, surprise, fear]\n"
               "Carefully read the input and select the most appropriate emotion based on the "
               "**overall tone, context, and word choice**.\n"
               "If multiple emotions are expressed, choose the one that is **most central** to "
               "the message.\n"
               "Respond with only one word, exactly as listed.\n"
               "Text: \"<your text here>\"\n"
               "Answer:",
               {{"anger", {"anger"}},
                {"disgust", {"disgust"}},
                {"neutral", {"neutral"}},
                {"love", {"love"}},
                {"joy", {"joy"}},
                {"anticipation", {"anticipation"}},
                {"optimism", {"optimism"}},
                {"sadness", {"sadness"}},
                {"trust", {"confidence", "trust"}},
                {"pessimism", {"pessimism"}},
                {"surprise", {"surprise"}},
                {"fear", {"fear"}}},
               false});

  t.push_back(
      {TemplateId::kMemePrompt1,
       "You're an expert Arabic social media hate content analyst. Your goal is to flag any "
       "content that is derogatory, disparaging, promotes negative stereotypes, incites any form "
       "of harm (even humorously), or contributes to a hostile environment.\n"
       "Provide the following for analysis:\n"
       "Meme Description (Visuals): Detailed text description of all visual elements "
       "(characters, symbols, actions, etc.).\n"
       "Meme Text (Arabic & English): Exact Arabic text and its literal English translation. "
       "Include any emojis/symbols.\n"
       "Context: Explain who is targeted (individuals, groups, professions, etc.), relevant "
       "current events, cultural/historical references, and any known slang/derogatory terms.\n"
       "User Intent (if known): Any information on the creator/sharer's likely purpose.\n"
       "Analysis: {Your detailed reasoning, explaining how visuals, text, and context "
       "contribute to hate.\n"
       "Focus on dehumanization, negative stereotypes, incitement (even if satirical), hostile "
       "environment creation, contempt, ridicule, disgust, targeting based on role, disparaging "
       "language (ableism, body shaming, etc.), and normalization of problematic behavior.}\n"
       "Final Answer: {hate/no hate}",
       kMemeLabels, true});

  t.push_back(
      {TemplateId::kMemePrompt2,
       "You are a hate speech analyst evaluating Arabic social media memes.\n"
       "Your goal is to flag hate speech, including implicit hate masked as humor or political "
       "discourse.\n"
       "Hate includes:\n"
       "Stereotyping or mocking a group based on ethnicity, nationality, gender, religion, or "
       "identity Jokes or memes that promote harmful generalizations\n"
       "Political content that blames or dehumanizes a people, not just a government or "
       "policy\n"
       "However, you must not flag:\n"
       "Political critique focused on leadership, government, or policy (not people)\n"
       "Cultural observations or satire without negative generalization\n"
       "Your analysis must:\n"
       "Describe the image and interpret the Arabic text\n"
       "Explain whether it includes group-based bias or stereotypes\n"
       "End with:\n"
       "Analysis: {your reasoning}\n"
       "Final Answer: {'hate' or 'no hate'}",
       kMemeLabels, true});

  t.push_back({TemplateId::kMemePrompt3,
               "You are a hate speech analyst evaluating Arabic social media memes.\n"
               "Your goal is to classify meme into hate or no_hate",
               kMemeLabels, true});

  // invented wording: no recorded prompt exists for the binary hope voter
  t.push_back({TemplateId::kHopeOrNot,
               "Classify each text into one of the two categories 'hope', or 'not_applicable'",
               {{"hope", {"hope"}}, {"not_applicable", {"not applicable", "not", "not hope"}}},
               false});
  return t;
}

}  // namespace

std::string_view to_string(TemplateId id) { return kTemplateNames[static_cast<std::size_t>(id)]; }

std::optional<TemplateId> parse_template_id(std::string_view text) {
  for (std::size_t i = 0; i < kTemplateNames.size(); ++i) {
    if (kTemplateNames[i] == text) return static_cast<TemplateId>(i);
  }
  return std::nullopt;
}

std::vector<std::string> PromptTemplate::expected_labels() const {
  std::vector<std::string> out;
  for (const auto& l : labels) out.push_back(l.label);
  return out;
}

std::span<const PromptTemplate> all_prompt_templates() {
  static const std::vector<PromptTemplate> templates = build_templates();
  return templates;
}

const PromptTemplate& prompt_template(TemplateId id) {
  return all_prompt_templates()[static_cast<std::size_t>(id)];
}

}  // namespace modpipe
