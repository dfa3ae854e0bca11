#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <doctest.h>

#include "modpipe/corpus.hpp"
#include "modpipe/error.hpp"
#include "modpipe/random.hpp"
#include "support.hpp"

using namespace modpipe;

namespace {

DatasetSplit read(const std::string& text, Task task) {
  std::istringstream in(text);
  return read_dataset(in, task, SplitName::kTrain);
}

std::string task1_line(const std::string& id, const std::string& label) {
  return R"({"id":")" + id + R"(","text":"t )" + id + R"(","image":null,"labels":{"task1":")" +
         label + R"(","emotion":null,"offensive":null,"hate_text":null,"meme_hate":null}})";
}

DatasetSplit hate_split(std::size_t not_hate, std::size_t hate) {
  DatasetSplit s;
  for (std::size_t i = 0; i < not_hate + hate; ++i) {
    Record r = testing::text_record("r" + std::to_string(i), "text " + std::to_string(i));
    r.gold.offensive = Offensive::kYes;
    r.gold.hate_text = i < not_hate ? TextHate::kNotHate : TextHate::kHate;
    s.records.push_back(r);
  }
  return s;
}

std::string strip_suffix(const std::string& id) { return id.substr(0, id.find('#')); }

}  // namespace

TEST_CASE("well-formed task-1 file loads every record") {
  testing::TempDir dir;
  testing::write_file(dir / "t1.jsonl", task1_line("a", "hope") + "\n" + task1_line("b", "hate") +
                                            "\n\n" + task1_line("c", "not_applicable") + "\n");
  const DatasetSplit split = load_dataset(dir / "t1.jsonl", Task::kHopeHate);
  REQUIRE(split.records.size() == 3);
  CHECK(split.records[0].gold.task1 == HopeLabel::kHope);
  CHECK(split.records[2].gold.task1 == HopeLabel::kNotApplicable);
  CHECK(split.base_dir == dir.path());
}

TEST_CASE("label outside the schema is rejected with the offending value") {
  try {
    read(task1_line("a", "hopeful"), Task::kHopeHate);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("hopeful") != std::string::npos);
  }
}

TEST_CASE("hate_text without offensive == yes violates the conditional sub-task") {
  const std::string line =
      R"({"id":"x","text":"t","image":null,"labels":{"task1":null,"emotion":"joy","offensive":"no","hate_text":"hate","meme_hate":null}})";
  CHECK_THROWS_AS(read(line, Task::kMultiTask), ValidationError);
  Record r = testing::text_record("x", "t");
  r.gold.offensive = Offensive::kNo;
  r.gold.hate_text = TextHate::kHate;
  CHECK_THROWS_AS(validate_record(r, Task::kMultiTask), ValidationError);
  r.gold.offensive = Offensive::kYes;
  CHECK_NOTHROW(validate_record(r, Task::kMultiTask));
}

TEST_CASE("malformed line reports its line number") {
  testing::TempDir dir;
  testing::write_file(dir / "bad.jsonl", task1_line("a", "hope") + "\n{not json\n");
  try {
    load_dataset(dir / "bad.jsonl", Task::kHopeHate);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("duplicate ids are a validation error") {
  CHECK_THROWS_AS(read(task1_line("a", "hope") + "\n" + task1_line("a", "hate"), Task::kHopeHate),
                  ValidationError);
}

TEST_CASE("record invariants") {
  Record r = testing::text_record("", "t");
  CHECK_THROWS_AS(validate_record(r, Task::kHopeHate), ValidationError);
  r = testing::text_record("m", "");
  r.gold.meme_hate = MemeHate::kHateful;
  CHECK_THROWS_AS(validate_record(r, Task::kMeme), ValidationError);  // no text and no image
  r.image_ref = "m.png";
  CHECK_NOTHROW(validate_record(r, Task::kMeme));
  r = testing::text_record("m", "caption");
  r.gold.meme_hate = MemeHate::kHateful;
  CHECK_THROWS_AS(validate_record(r, Task::kMeme), ValidationError);  // memes need an image
  r = testing::text_record("t", "text");
  r.gold.task1 = HopeLabel::kHope;
  CHECK_THROWS_AS(validate_record(r, Task::kMultiTask), ValidationError);  // foreign label group
}

TEST_CASE("unknown keys and a missing file are rejected") {
  CHECK_THROWS_AS(read(R"({"id":"a","text":"t","image":null,"labels":{},"extra":1})", Task::kHopeHate),
                  ValidationError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/modpipe.jsonl", Task::kHopeHate), MissingInputError);
}

TEST_CASE("serialize then load is the normalized input") {
  const std::string with_alias =
      R"({"labels":{"emotion":"confidence","offensive":"no"},"text":"نص","id":"e1","image":null})";
  const Record r = parse_record(with_alias, Task::kMultiTask);
  const std::string canonical = serialize_record(r);
  CHECK(canonical ==
        R"({"id":"e1","text":"نص","image":null,"labels":{"task1":null,"emotion":"trust","offensive":"no","hate_text":null,"meme_hate":null}})");
  CHECK(parse_record(canonical, Task::kMultiTask) == r);

  for (int task = 1; task <= 3; ++task) {
    const auto path = testing::kFixtureDir / ("task" + std::to_string(task)) / "validation.jsonl";
    const DatasetSplit split = load_dataset(path, static_cast<Task>(task));
    std::string again;
    for (const auto& rec : split.records) again += serialize_record(rec) + "\n";
    CHECK(again == testing::slurp(path));
  }
}

TEST_CASE("splits must be disjoint") {
  DatasetSplit a = read(task1_line("x", "hope"), Task::kHopeHate);
  DatasetSplit b = read(task1_line("x", "hate"), Task::kHopeHate);
  b.name = SplitName::kTest;
  std::vector<DatasetSplit> both{a, b};
  CHECK_THROWS_AS(check_disjoint(both), ValidationError);
  b.records[0].id = "y";
  both = {a, b};
  CHECK_NOTHROW(check_disjoint(both));
}

TEST_CASE("class_histogram counts labels and missing entries") {
  CHECK(class_histogram(DatasetSplit{}, select_label(LabelField::kTask1)).empty());
  const DatasetSplit s = read(task1_line("a", "hope") + "\n" + task1_line("b", "hope") + "\n" +
                                  task1_line("c", "hate"),
                              Task::kHopeHate);
  const auto h = class_histogram(s, select_label(LabelField::kTask1));
  CHECK(h == std::map<std::string, std::size_t>{{"hope", 2}, {"hate", 1}});
  const auto missing = class_histogram(s, select_label(LabelField::kEmotion));
  CHECK(missing.at(std::string(kMissingLabel)) == 3);
}

TEST_CASE("oversampling multiplies only the minority count") {
  const auto selector = select_label(LabelField::kHateText);
  const DatasetSplit base = hate_split(100, 20);
  const DatasetSplit out = oversample_minority(base, selector, "hate", 5, 42);
  CHECK(class_histogram(out, selector) ==
        std::map<std::string, std::size_t>{{"hate", 100}, {"not_hate", 100}});

  std::map<std::string, int> copies;
  std::set<std::string> ids;
  for (const auto& r : out.records) {
    ++copies[strip_suffix(r.id)];
    ids.insert(r.id);
  }
  CHECK(ids.size() == out.records.size());
  for (const auto& r : base.records) {
    CHECK(copies[r.id] == (r.gold.hate_text == TextHate::kHate ? 5 : 1));
  }
  CHECK(oversample_minority(base, selector, "hate", 5, 42).records == out.records);
  CHECK(oversample_minority(base, selector, "hate", 5, 43).records != out.records);
}

TEST_CASE("oversampling with factor 1 keeps the multiset") {
  const auto selector = select_label(LabelField::kHateText);
  const DatasetSplit base = hate_split(7, 3);
  DatasetSplit out = oversample_minority(base, selector, "hate", 1, 5);
  auto by_id = [](const Record& a, const Record& b) { return a.id < b.id; };
  std::vector<Record> a = base.records;
  std::sort(a.begin(), a.end(), by_id);
  std::sort(out.records.begin(), out.records.end(), by_id);
  CHECK(out.records == a);
}

TEST_CASE("oversampling preconditions") {
  const auto selector = select_label(LabelField::kHateText);
  CHECK_THROWS_AS(oversample_minority(hate_split(5, 0), selector, "hate", 5, 1), InputError);
  CHECK_THROWS_AS(oversample_minority(hate_split(5, 2), selector, "hate", 0, 1), InputError);
}

TEST_CASE("oversampling property over random splits") {
  Rng rng(2024);
  const auto selector = select_label(LabelField::kHateText);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t major = rng.index(60);
    const std::size_t minor = 1 + rng.index(30);
    const int factor = 1 + static_cast<int>(rng.index(10));
    const DatasetSplit base = hate_split(major, minor);
    const auto before = class_histogram(base, selector);
    const auto after = class_histogram(oversample_minority(base, selector, "hate", factor, trial), selector);
    CHECK(after.at("hate") == before.at("hate") * static_cast<std::size_t>(factor));
    if (major > 0) CHECK(after.at("not_hate") == before.at("not_hate"));
  }
}
