#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

namespace modpipe {

/// Shape of the generated fixture set. Counts are per split.
struct SynthOptions {
  std::uint64_t seed = 20250917;
  std::size_t train = 120;
  std::size_t validation = 30;
  std::size_t test = 60;
  /// Task-3 splits are larger so the hateful minority stays trainable.
  std::size_t meme_train = 200;
  std::size_t meme_validation = 40;
  std::size_t meme_test = 80;
  double hateful_fraction = 0.2;
  /// Probability that a replayed model answer disagrees with the gold label.
  double replay_noise = 0.15;
};

/// Writes datasets, image files, replay fixtures and run configs for all
/// three tasks under `root`:
///   task{1,2,3}/{train,validation,test}.jsonl, task3/images/*.bin,
///   replay/*.jsonl, task{1,2,3}.json
void write_synthetic_fixtures(const std::filesystem::path& root, const SynthOptions& options = {});

}  // namespace modpipe
