#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modpipe/labels.hpp"

namespace modpipe {

struct GoldLabels {
  std::optional<HopeLabel> task1;
  std::optional<Emotion> emotion;
  std::optional<Offensive> offensive;
  std::optional<TextHate> hate_text;
  std::optional<MemeHate> meme_hate;

  bool operator==(const GoldLabels&) const = default;
};

/// One labeled sample. `image_ref` is a path relative to the dataset file.
struct Record {
  std::string id;
  std::string text;
  std::optional<std::string> image_ref;
  GoldLabels gold;

  bool operator==(const Record&) const = default;
};

enum class SplitName { kTrain, kValidation, kTest };

std::string_view to_string(SplitName name);
std::optional<SplitName> parse_split_name(std::string_view text);

struct DatasetSplit {
  SplitName name = SplitName::kTrain;
  std::vector<Record> records;
  /// Directory that relative image references resolve against.
  std::filesystem::path base_dir;
};

/// Throws ValidationError when the record breaks the schema of `task`.
void validate_record(const Record& record, Task task);

/// Parses one line of the dataset format and validates it against `task`.
/// `line_number` is only used for error messages.
Record parse_record(std::string_view line, Task task, std::size_t line_number = 0);

/// Canonical single-line serialization (fixed key order, aliases resolved).
std::string serialize_record(const Record& record);

DatasetSplit read_dataset(std::istream& in, Task task, SplitName name);
DatasetSplit load_dataset(const std::filesystem::path& path, Task task,
                          SplitName name = SplitName::kTrain);
void write_dataset(const std::filesystem::path& path, const DatasetSplit& split);

/// Throws ValidationError if any record id occurs in more than one split.
void check_disjoint(std::span<const DatasetSplit> splits);

/// Extracts one label of a record as its canonical string, if present.
using LabelSelector = std::function<std::optional<std::string>(const Record&)>;

LabelSelector select_label(LabelField field);

/// The label slot that a task's binary/primary classifier reads.
LabelField primary_field(Task task);

/// Histogram key for records whose selected label is absent.
inline constexpr std::string_view kMissingLabel = "<missing>";

std::map<std::string, std::size_t> class_histogram(const DatasetSplit& split,
                                                   const LabelSelector& selector);

/// Repeats every record of `minority_class` `factor` times (duplicates get
/// "#k" id suffixes) and shuffles the result with `seed`.
DatasetSplit oversample_minority(const DatasetSplit& split, const LabelSelector& selector,
                                 std::string_view minority_class, int factor,
                                 std::uint64_t seed);

}  // namespace modpipe
