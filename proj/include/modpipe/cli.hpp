#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modpipe/corpus.hpp"
#include "modpipe/embeddings.hpp"
#include "modpipe/error.hpp"
#include "modpipe/fusion.hpp"
#include "modpipe/gateway.hpp"
#include "modpipe/mlp.hpp"
#include "modpipe/svm.hpp"
#include "modpipe/transport.hpp"

namespace modpipe {

/// Built-in voter name for the one-vs-rest text-embedding SVM of task 1.
inline constexpr std::string_view kSvmTextVoter = "svm_text";

/// Fully defaulted and validated run configuration.
struct RunConfig {
  std::string command;
  Task task = Task::kMeme;
  SplitName split = SplitName::kTest;
  std::map<SplitName, std::filesystem::path> datasets;
  FusionMode fusion = FusionMode::kAverage;
  std::string detector = "svm";  // svm | mlp | llm | safety (task 3)
  std::string detector_predictor;
  int oversample_factor = 1;
  std::uint64_t seed = 0;
  std::filesystem::path cache_dir;
  std::filesystem::path fixtures_dir;
  std::filesystem::path out_dir = "modpipe-out";
  std::size_t max_in_flight = 4;
  EmbeddingProviderSpec embedding;
  SvmHyperparams svm;
  MlpConfig mlp = MlpConfig::reference();
  std::map<std::string, PredictorSpec> predictors;
  std::array<std::string, 3> voters;
  std::array<std::string, 3> priority;
  std::string rescue;
  std::string emotion_predictor;
  std::string offensive_predictor;
  std::string hate_predictor;

  /// The exact effective configuration, stable key order.
  nlohmann::ordered_json to_json() const;
};

/// Command-line values; unset members defer to the config file.
struct CliOverrides {
  std::optional<std::string> config;
  std::optional<std::string> ensemble_config;
  std::optional<std::string> task;
  std::optional<std::string> split;
  std::optional<std::string> fusion;
  std::optional<std::string> detector;
  std::optional<int> oversample_factor;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> cache_dir;
  std::optional<std::string> fixtures;
  std::optional<std::string> out;
  std::optional<std::string> train;
  std::optional<std::string> validation;
  std::optional<std::string> test;
  std::optional<std::size_t> max_in_flight;
};

/// Merges defaults, the config file, the ensemble config and flags (flags
/// win), then validates. Throws UsageError on contradictory options.
RunConfig plan_run(const std::string& command, const CliOverrides& overrides);

/// Process exit status for an error category; 0 is success.
int exit_code(ErrorCategory category);

/// Entry point behind the `modpipe` executable. `transport` replaces the
/// network layer (tests use it to assert that no request is sent).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            std::shared_ptr<Transport> transport = nullptr);

}  // namespace modpipe
