#include "modpipe/synth.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "modpipe/corpus.hpp"
#include "modpipe/error.hpp"
#include "modpipe/labels.hpp"
#include "modpipe/random.hpp"

namespace modpipe {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

const std::vector<std::string_view> kFiller{
    "اليوم", "الطقس", "المباراة", "السوق", "القهوة", "الكتاب", "المدينة", "الطريق",
    "الناس", "العمل", "الأخبار", "الصباح", "المساء", "الجامعة", "الحافلة", "البيت"};
const std::vector<std::string_view> kHopeWords{"أمل", "غد أفضل", "نستطيع معا", "تفاؤل",
                                               "نور", "سننجح", "بداية جديدة"};
const std::vector<std::string_view> kHateWords{"كراهية", "اخرجوا", "حقد", "لا مكان لكم",
                                               "أعداء", "حثالة"};
const std::vector<std::string_view> kInsultWords{"غبي", "تافه", "سخيف", "فاشل"};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[static_cast<std::size_t>(rng.index(items.size()))];
}

std::string sentence(Rng& rng, const std::vector<std::string_view>& signal, int signal_words) {
  std::vector<std::string> words;
  const int filler = 3 + static_cast<int>(rng.index(4));
  for (int i = 0; i < filler; ++i) words.emplace_back(pick(rng, kFiller));
  for (int i = 0; i < signal_words; ++i) {
    const auto pos = static_cast<std::size_t>(rng.index(words.size() + 1));
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), std::string(pick(rng, signal)));
  }
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::string record_id(std::string_view prefix, SplitName split, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%s-%04zu", std::string(prefix).c_str(),
                std::string(to_string(split)).c_str(), i);
  return buf;
}

/// Draws from `labels` with the given weights.
template <std::size_t N>
std::size_t weighted(Rng& rng, const std::array<double, N>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < N; ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return N - 1;
}

/// Returns `gold` or, with probability `noise`, another label from `labels`.
std::string noisy(Rng& rng, std::string_view gold, const std::vector<std::string>& labels,
                  double noise) {
  if (!rng.bernoulli(noise)) return std::string(gold);
  std::vector<std::string> others;
  for (const auto& l : labels) {
    if (l != gold) others.push_back(l);
  }
  return pick(rng, others);
}

/// Free-text phrasing of a label in one of several response styles.
using Phrase = std::function<std::string(Rng&, const std::string&)>;

std::string spaced(std::string label) {
  for (char& c : label) {
    if (c == '_') c = ' ';
  }
  return label;
}

std::string capitalized(std::string label) {
  if (!label.empty() && label[0] >= 'a' && label[0] <= 'z') label[0] = static_cast<char>(label[0] - 32);
  return label;
}

std::string plain_phrase(Rng& rng, const std::string& label) {
  switch (rng.index(5)) {
    case 0: return label;
    case 1: return capitalized(label) + ".";
    case 2: return "'" + label + "'";
    case 3: return "Label: " + spaced(label);
    default: return "  " + capitalized(spaced(label)) + "\n";
  }
}

std::string meme_word(const std::string& label) { return label == "hateful" ? "hate" : "no hate"; }

const std::vector<std::string_view> kReasoning{
    "The image shows a crowd scene and the caption is a short remark about the match.",
    "The visual is a cartoon figure with exaggerated features and the caption targets a group.",
    "The text is a joke about daily life and the picture repeats it without a target.",
    "The meme pairs a political figure with a caption about policy.",
};

std::string meme_prompt1_phrase(Rng& rng, const std::string& label) {
  std::string analysis(pick(rng, kReasoning));
  switch (rng.index(3)) {
    case 0: return "Analysis: {" + analysis + "}\nFinal Answer: {" + meme_word(label) + "}";
    case 1: return "Meme Description (Visuals): " + analysis + "\nFinal Answer: " + meme_word(label);
    default: return "Analysis: " + analysis + "\n\nFinal Answer: {" + meme_word(label) + "}\n";
  }
}

std::string meme_prompt2_phrase(Rng& rng, const std::string& label) {
  std::string analysis(pick(rng, kReasoning));
  if (rng.bernoulli(0.5)) return "Analysis: {" + analysis + "}\nFinal Answer: {'" + meme_word(label) + "'}";
  return "Analysis: " + analysis + "\nFinal Answer: '" + meme_word(label) + "'";
}

std::string meme_prompt3_phrase(Rng& rng, const std::string& label) {
  switch (rng.index(4)) {
    case 0: return meme_word(label);
    case 1: return label == "hateful" ? "hate" : "no_hate";
    case 2: return capitalized(meme_word(label)) + ".";
    default: return label == "hateful" ? "This meme is hateful." : "This meme is not hateful.";
  }
}

std::string emotion_phrase(Rng& rng, const std::string& label) {
  if (label == "trust" && rng.bernoulli(0.6)) {
    return rng.bernoulli(0.5) ? "confidence" : "Confidence.";
  }
  return rng.bernoulli(0.7) ? plain_phrase(rng, label) : "Emotion: " + label;
}

std::string safety_payload(Rng& rng, bool flag_hate) {
  ordered_json categories;
  const bool violence = rng.bernoulli(0.2);
  categories["hate"] = flag_hate;
  categories["harassment"] = flag_hate && rng.bernoulli(0.5);
  categories["violence"] = violence;
  ordered_json result;
  result["flagged"] = flag_hate || violence;
  result["categories"] = categories;
  if (rng.bernoulli(0.5)) return result.dump();
  ordered_json wrapped;
  wrapped["id"] = "modr-synthetic";
  wrapped["results"] = ordered_json::array({result});
  return wrapped.dump();
}

struct FixtureFile {
  std::string file;
  std::string template_key;
  std::vector<std::pair<std::string, std::string>> lines;  // record id, response

  void write(const fs::path& root) const {
    std::ofstream out(root / "replay" / file, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + (root / "replay" / file).string());
    for (const auto& [id, response] : lines) {
      ordered_json line;
      line["template"] = template_key;
      line["record_id"] = id;
      line["response"] = response;
      out << line.dump() << '\n';
    }
  }
};

void write_json(const fs::path& path, const ordered_json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

ordered_json dataset_paths(std::string_view task_dir) {
  ordered_json d;
  for (SplitName s : {SplitName::kTrain, SplitName::kValidation, SplitName::kTest}) {
    d[std::string(to_string(s))] = std::string(task_dir) + "/" + std::string(to_string(s)) + ".jsonl";
  }
  return d;
}

ordered_json replay_spec(std::string_view template_key, std::string_view file) {
  ordered_json p;
  p["kind"] = "replay";
  if (!template_key.empty()) p["template"] = std::string(template_key);
  p["fixture"] = "replay/" + std::string(file);
  return p;
}

std::vector<std::string> to_strings(std::span<const std::string_view> names) {
  return {names.begin(), names.end()};
}

constexpr std::array<SplitName, 3> kSplits{SplitName::kTrain, SplitName::kValidation,
                                           SplitName::kTest};

// ---------------------------------------------------------------------------

void task1(const fs::path& root, const SynthOptions& o, Rng& rng) {
  const std::vector<std::string> labels = to_strings(kHopeLabelNames);
  FixtureFile gpt{"task1_gpt.jsonl", "task1_3class", {}};
  FixtureFile gemini{"task1_gemini.jsonl", "task1_3class", {}};
  FixtureFile rescue{"task1_rescue.jsonl", "hope_or_not", {}};
  const std::array<std::size_t, 3> sizes{o.train, o.validation, o.test};
  for (std::size_t s = 0; s < kSplits.size(); ++s) {
    DatasetSplit split{kSplits[s], {}, {}};
    for (std::size_t i = 0; i < sizes[s]; ++i) {
      Record r;
      r.id = record_id("t1", kSplits[s], i);
      const auto label = static_cast<HopeLabel>(weighted(rng, std::array<double, 3>{0.3, 0.25, 0.45}));
      r.gold.task1 = label;
      switch (label) {
        case HopeLabel::kHope: r.text = sentence(rng, kHopeWords, 1 + static_cast<int>(rng.index(2))); break;
        case HopeLabel::kHate: r.text = sentence(rng, kHateWords, 1 + static_cast<int>(rng.index(2))); break;
        case HopeLabel::kNotApplicable: r.text = sentence(rng, kFiller, 1); break;
      }
      const std::string gold(to_string(label));
      // Hope is the class the voters tend to miss, toward not_applicable.
      const auto vote = [&](double noise) {
        if (label == HopeLabel::kHope && rng.bernoulli(0.3)) return std::string("not_applicable");
        return noisy(rng, gold, labels, noise);
      };
      gpt.lines.emplace_back(r.id, plain_phrase(rng, vote(o.replay_noise)));
      gemini.lines.emplace_back(r.id, plain_phrase(rng, vote(o.replay_noise)));
      const bool says_hope = label == HopeLabel::kHope ? rng.bernoulli(0.85) : rng.bernoulli(0.08);
      std::string answer = says_hope ? "hope" : pick(rng, std::vector<std::string>{
                                                          "not_applicable", "Not hope.",
                                                          "not applicable"});
      rescue.lines.emplace_back(r.id, answer);
      split.records.push_back(std::move(r));
    }
    write_dataset(root / "task1" / (std::string(to_string(kSplits[s])) + ".jsonl"), split);
  }
  for (const auto* f : {&gpt, &gemini, &rescue}) f->write(root);

  ordered_json cfg;
  cfg["task"] = 1;
  cfg["datasets"] = dataset_paths("task1");
  cfg["split"] = "test";
  cfg["fusion_mode"] = "text";
  cfg["seed"] = 7;
  cfg["embedding"] = {{"kind", "stub"}, {"model_name", "stub-embedding-v1"}, {"label_leak", 0.8}};
  cfg["predictors"] = {{"gpt_ft", replay_spec("task1_3class", gpt.file)},
                       {"gemini_ft", replay_spec("task1_3class", gemini.file)},
                       {"hope_rescue", replay_spec("hope_or_not", rescue.file)}};
  cfg["ensemble"] = {{"voters", {"gpt_ft", "gemini_ft", "svm_text"}},
                     {"priority", {"gpt_ft", "gemini_ft", "svm_text"}},
                     {"rescue", "hope_rescue"}};
  write_json(root / "task1.json", cfg);
}

void task2(const fs::path& root, const SynthOptions& o, Rng& rng) {
  FixtureFile emotion{"task2_emotion.jsonl", "emotion_12", {}};
  FixtureFile offensive{"task2_offensive.jsonl", "offensive_yes_no", {}};
  FixtureFile hate{"task2_hate.jsonl", "hate_not_hate", {}};
  const std::vector<std::string> emotions = to_strings(kEmotionNames);
  const std::vector<std::string> yes_no = to_strings(kOffensiveNames);
  const std::vector<std::string> hate_labels = to_strings(kTextHateNames);
  const std::array<std::size_t, 3> sizes{o.train, o.validation, o.test};
  for (std::size_t s = 0; s < kSplits.size(); ++s) {
    DatasetSplit split{kSplits[s], {}, {}};
    for (std::size_t i = 0; i < sizes[s]; ++i) {
      Record r;
      r.id = record_id("t2", kSplits[s], i);
      const auto emo = static_cast<Emotion>(rng.index(kEmotionNames.size()));
      const bool is_offensive = rng.bernoulli(0.35);
      r.gold.emotion = emo;
      r.gold.offensive = is_offensive ? Offensive::kYes : Offensive::kNo;
      if (is_offensive) r.gold.hate_text = rng.bernoulli(0.4) ? TextHate::kHate : TextHate::kNotHate;
      if (r.gold.hate_text == TextHate::kHate) {
        r.text = sentence(rng, kHateWords, 1);
      } else if (is_offensive) {
        r.text = sentence(rng, kInsultWords, 1);
      } else {
        r.text = sentence(rng, kHopeWords, static_cast<int>(rng.index(2)));
      }
      emotion.lines.emplace_back(
          r.id, emotion_phrase(rng, noisy(rng, to_string(emo), emotions, o.replay_noise)));
      offensive.lines.emplace_back(
          r.id, plain_phrase(rng, noisy(rng, to_string(*r.gold.offensive), yes_no, o.replay_noise / 2)));
      // Every record gets a hate answer: the offensive predictor may say yes
      // where the gold label says no.
      const std::string hate_gold = r.gold.hate_text ? std::string(to_string(*r.gold.hate_text))
                                                     : std::string(rng.bernoulli(0.3) ? "hate" : "not_hate");
      hate.lines.emplace_back(r.id, plain_phrase(rng, noisy(rng, hate_gold, hate_labels, o.replay_noise)));
      split.records.push_back(std::move(r));
    }
    write_dataset(root / "task2" / (std::string(to_string(kSplits[s])) + ".jsonl"), split);
  }
  for (const auto* f : {&emotion, &offensive, &hate}) f->write(root);

  ordered_json cfg;
  cfg["task"] = 2;
  cfg["datasets"] = dataset_paths("task2");
  cfg["split"] = "test";
  cfg["fusion_mode"] = "text";
  cfg["seed"] = 7;
  cfg["oversample_factor"] = 5;
  cfg["predictors"] = {{"emotion_llm", replay_spec("emotion_12", emotion.file)},
                       {"offensive_llm", replay_spec("offensive_yes_no", offensive.file)},
                       {"hate_llm", replay_spec("hate_not_hate", hate.file)}};
  cfg["task2"] = {{"emotion", "emotion_llm"}, {"offensive", "offensive_llm"}, {"hate", "hate_llm"}};
  write_json(root / "task2.json", cfg);
}

void task3(const fs::path& root, const SynthOptions& o, Rng& rng) {
  fs::create_directories(root / "task3" / "images");
  FixtureFile p1{"task3_meme_prompt1.jsonl", "meme_prompt1", {}};
  FixtureFile p2{"task3_meme_prompt2.jsonl", "meme_prompt2", {}};
  FixtureFile p3{"task3_meme_prompt3.jsonl", "meme_prompt3", {}};
  FixtureFile safety{"task3_safety.jsonl", "safety_adapter", {}};
  const std::vector<std::string> labels = to_strings(kMemeHateNames);
  const std::array<std::size_t, 3> sizes{o.meme_train, o.meme_validation, o.meme_test};
  for (std::size_t s = 0; s < kSplits.size(); ++s) {
    DatasetSplit split{kSplits[s], {}, {}};
    std::string previous_image;
    std::optional<MemeHate> previous_label;
    for (std::size_t i = 0; i < sizes[s]; ++i) {
      Record r;
      r.id = record_id("m", kSplits[s], i);
      const bool hateful = rng.bernoulli(o.hateful_fraction);
      const MemeHate label = hateful ? MemeHate::kHateful : MemeHate::kNotHateful;
      r.gold.meme_hate = label;
      r.text = hateful ? sentence(rng, kHateWords, 1) : sentence(rng, kFiller, 1);
      // Now and then a meme reuses the previous image, as reposts do.
      if (!previous_image.empty() && previous_label == label && i % 17 == 0) {
        r.image_ref = previous_image;
      } else {
        r.image_ref = "images/" + r.id + ".bin";
        std::string bytes(192, '\0');
        for (char& b : bytes) b = static_cast<char>(rng.index(256));
        std::ofstream img(root / "task3" / *r.image_ref, std::ios::binary | std::ios::trunc);
        img << bytes;
      }
      previous_image = *r.image_ref;
      previous_label = label;
      const std::string gold(to_string(label));
      p1.lines.emplace_back(r.id, meme_prompt1_phrase(rng, noisy(rng, gold, labels, o.replay_noise)));
      p2.lines.emplace_back(r.id, meme_prompt2_phrase(rng, noisy(rng, gold, labels, o.replay_noise)));
      p3.lines.emplace_back(r.id, meme_prompt3_phrase(rng, noisy(rng, gold, labels, o.replay_noise)));
      // The safety classifier misses most hateful memes.
      safety.lines.emplace_back(r.id, safety_payload(rng, hateful ? rng.bernoulli(0.4) : rng.bernoulli(0.03)));
      split.records.push_back(std::move(r));
    }
    write_dataset(root / "task3" / (std::string(to_string(kSplits[s])) + ".jsonl"), split);
  }
  for (const auto* f : {&p1, &p2, &p3, &safety}) f->write(root);

  ordered_json cfg;
  cfg["task"] = 3;
  cfg["datasets"] = dataset_paths("task3");
  cfg["split"] = "test";
  cfg["fusion_mode"] = "avg";
  cfg["detector"] = "svm";
  cfg["seed"] = 7;
  cfg["oversample_factor"] = 9;
  cfg["embedding"] = {{"kind", "stub"}, {"model_name", "stub-embedding-v1"}, {"label_leak", 0.8}};
  cfg["predictors"] = {{"meme_prompt1", replay_spec("meme_prompt1", p1.file)},
                       {"meme_prompt2", replay_spec("meme_prompt2", p2.file)},
                       {"meme_prompt3", replay_spec("meme_prompt3", p3.file)},
                       {"safety_adapter", replay_spec("", safety.file)}};
  write_json(root / "task3.json", cfg);
}

}  // namespace

void write_synthetic_fixtures(const fs::path& root, const SynthOptions& options) {
  for (const char* dir : {"task1", "task2", "task3", "replay"}) fs::create_directories(root / dir);
  // Separate streams keep each task stable when another one changes.
  Rng r1(mix_seed(options.seed, 1));
  Rng r2(mix_seed(options.seed, 2));
  Rng r3(mix_seed(options.seed, 3));
  task1(root, options, r1);
  task2(root, options, r2);
  task3(root, options, r3);
}

}  // namespace modpipe
