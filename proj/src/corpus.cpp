#include "modpipe/corpus.hpp"

#include <fstream>
#include <istream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "modpipe/error.hpp"
#include "modpipe/random.hpp"

namespace modpipe {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(SplitName name) {
  switch (name) {
    case SplitName::kTrain: return "train";
    case SplitName::kValidation: return "validation";
    case SplitName::kTest: return "test";
  }
  return "?";
}

std::optional<SplitName> parse_split_name(std::string_view text) {
  if (text == "train") return SplitName::kTrain;
  if (text == "validation") return SplitName::kValidation;
  if (text == "test") return SplitName::kTest;
  return std::nullopt;
}

void validate_record(const Record& record, Task task) {
  const auto fail = [&](const std::string& what) {
    throw ValidationError("record '" + record.id + "': " + what);
  };
  if (record.id.empty()) throw ValidationError("record with empty id");
  if (record.text.empty() && !record.image_ref) fail("empty text requires an image");
  if (record.image_ref && record.image_ref->empty()) fail("image reference is an empty string");

  const GoldLabels& g = record.gold;
  const bool task1_group = g.task1.has_value();
  const bool task2_group = g.emotion || g.offensive || g.hate_text;
  const bool task3_group = g.meme_hate.has_value();
  switch (task) {
    case Task::kHopeHate:
      if (task2_group || task3_group) fail("task-1 record carries labels of another task");
      break;
    case Task::kMultiTask:
      if (task1_group || task3_group) fail("task-2 record carries labels of another task");
      if (g.hate_text && g.offensive != Offensive::kYes) {
        fail("hate_text is only defined when offensive == yes");
      }
      break;
    case Task::kMeme:
      if (task1_group || task2_group) fail("task-3 record carries labels of another task");
      if (!record.image_ref) fail("task-3 record requires an image");
      break;
  }
}

namespace {

template <typename Enum, typename ParseFn>
std::optional<Enum> read_label(const json& labels, const char* key, ParseFn parse) {
  auto it = labels.find(key);
  if (it == labels.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw ValidationError(std::string("label '") + key + "' must be a string or null");
  }
  const auto& text = it->get_ref<const std::string&>();
  auto value = parse(text);
  if (!value) {
    throw ValidationError(std::string("label '") + key + "' has value '" + text +
                          "' outside the schema");
  }
  return value;
}

const std::set<std::string> kRecordKeys{"id", "text", "image", "labels"};
const std::set<std::string> kLabelKeys{"task1", "emotion", "offensive", "hate_text", "meme_hate"};

template <typename T>
ordered_json label_json(const std::optional<T>& v) {
  if (!v) return nullptr;
  return std::string(to_string(*v));
}

}  // namespace

Record parse_record(std::string_view line, Task task, std::size_t line_number) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed record: ") + e.what(), line_number);
  }
  const std::string where = line_number ? "line " + std::to_string(line_number) + ": " : "";
  try {
    if (!doc.is_object()) throw ValidationError("record must be an object");
    for (const auto& [key, _] : doc.items()) {
      if (!kRecordKeys.contains(key)) throw ValidationError("unknown record key '" + key + "'");
    }
    Record record;
    if (!doc.contains("id") || !doc["id"].is_string()) {
      throw ValidationError("missing string field 'id'");
    }
    record.id = doc["id"].get<std::string>();
    if (!doc.contains("text") || !doc["text"].is_string()) {
      throw ValidationError("missing string field 'text'");
    }
    record.text = doc["text"].get<std::string>();
    if (auto it = doc.find("image"); it != doc.end() && !it->is_null()) {
      if (!it->is_string()) throw ValidationError("'image' must be a string or null");
      record.image_ref = it->get<std::string>();
    }
    if (auto it = doc.find("labels"); it != doc.end() && !it->is_null()) {
      if (!it->is_object()) throw ValidationError("'labels' must be an object");
      for (const auto& [key, _] : it->items()) {
        if (!kLabelKeys.contains(key)) throw ValidationError("unknown label key '" + key + "'");
      }
      record.gold.task1 = read_label<HopeLabel>(*it, "task1", parse_hope_label);
      record.gold.emotion = read_label<Emotion>(*it, "emotion", parse_emotion);
      record.gold.offensive = read_label<Offensive>(*it, "offensive", parse_offensive);
      record.gold.hate_text = read_label<TextHate>(*it, "hate_text", parse_text_hate);
      record.gold.meme_hate = read_label<MemeHate>(*it, "meme_hate", parse_meme_hate);
    }
    validate_record(record, task);
    return record;
  } catch (const ValidationError& e) {
    throw ValidationError(where + e.what());
  }
}

std::string serialize_record(const Record& record) {
  ordered_json doc;
  doc["id"] = record.id;
  doc["text"] = record.text;
  doc["image"] = record.image_ref ? ordered_json(*record.image_ref) : ordered_json(nullptr);
  ordered_json labels;
  labels["task1"] = label_json(record.gold.task1);
  labels["emotion"] = label_json(record.gold.emotion);
  labels["offensive"] = label_json(record.gold.offensive);
  labels["hate_text"] = label_json(record.gold.hate_text);
  labels["meme_hate"] = label_json(record.gold.meme_hate);
  doc["labels"] = std::move(labels);
  return doc.dump();
}

DatasetSplit read_dataset(std::istream& in, Task task, SplitName name) {
  DatasetSplit split;
  split.name = name;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Record record = parse_record(line, task, line_number);
    if (!seen.insert(record.id).second) {
      throw ValidationError("line " + std::to_string(line_number) + ": duplicate id '" +
                            record.id + "'");
    }
    split.records.push_back(std::move(record));
  }
  return split;
}

DatasetSplit load_dataset(const std::filesystem::path& path, Task task, SplitName name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open dataset file " + path.string());
  try {
    DatasetSplit split = read_dataset(in, task, name);
    split.base_dir = path.parent_path();
    return split;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_dataset(const std::filesystem::path& path, const DatasetSplit& split) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write dataset file " + path.string());
  for (const Record& r : split.records) out << serialize_record(r) << '\n';
}

void check_disjoint(std::span<const DatasetSplit> splits) {
  std::unordered_map<std::string, SplitName> owner;
  for (const DatasetSplit& split : splits) {
    for (const Record& r : split.records) {
      auto [it, inserted] = owner.emplace(r.id, split.name);
      if (!inserted) {
        throw ValidationError("id '" + r.id + "' appears in both " +
                              std::string(to_string(it->second)) + " and " +
                              std::string(to_string(split.name)));
      }
    }
  }
}

LabelSelector select_label(LabelField field) {
  const auto wrap = [](const auto& v) -> std::optional<std::string> {
    if (!v) return std::nullopt;
    return std::string(to_string(*v));
  };
  switch (field) {
    case LabelField::kTask1: return [=](const Record& r) { return wrap(r.gold.task1); };
    case LabelField::kEmotion: return [=](const Record& r) { return wrap(r.gold.emotion); };
    case LabelField::kOffensive: return [=](const Record& r) { return wrap(r.gold.offensive); };
    case LabelField::kHateText: return [=](const Record& r) { return wrap(r.gold.hate_text); };
    case LabelField::kMemeHate: return [=](const Record& r) { return wrap(r.gold.meme_hate); };
  }
  throw std::logic_error("unhandled label field");
}

LabelField primary_field(Task task) {
  switch (task) {
    case Task::kHopeHate: return LabelField::kTask1;
    case Task::kMultiTask: return LabelField::kHateText;
    case Task::kMeme: return LabelField::kMemeHate;
  }
  throw std::logic_error("unhandled task");
}

std::map<std::string, std::size_t> class_histogram(const DatasetSplit& split,
                                                   const LabelSelector& selector) {
  std::map<std::string, std::size_t> counts;
  for (const Record& r : split.records) {
    auto label = selector(r);
    ++counts[label ? *label : std::string(kMissingLabel)];
  }
  return counts;
}

DatasetSplit oversample_minority(const DatasetSplit& split, const LabelSelector& selector,
                                 std::string_view minority_class, int factor,
                                 std::uint64_t seed) {
  if (factor < 1) throw InputError("oversampling factor must be >= 1");
  DatasetSplit out;
  out.name = split.name;
  out.base_dir = split.base_dir;
  bool found = false;
  for (const Record& r : split.records) {
    auto label = selector(r);
    const bool minority = label && *label == minority_class;
    out.records.push_back(r);
    if (!minority) continue;
    found = true;
    for (int k = 1; k < factor; ++k) {
      Record copy = r;
      copy.id += "#" + std::to_string(k);
      out.records.push_back(std::move(copy));
    }
  }
  if (!found) {
    throw InputError("minority class '" + std::string(minority_class) +
                     "' does not occur; nothing to oversample");
  }
  Rng rng(seed);
  rng.shuffle(std::span<Record>(out.records));
  return out;
}

}  // namespace modpipe
