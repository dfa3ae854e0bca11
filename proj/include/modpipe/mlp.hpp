#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "modpipe/random.hpp"

namespace modpipe {

/// Weights of the negative (0) and positive (1) class in the loss.
using ClassWeights = std::array<double, 2>;

struct MlpConfig {
  /// Input width followed by the hidden widths of each branch.
  std::vector<Eigen::Index> branch_dims{512, 256, 128, 64};
  /// Concatenated width, hidden widths, then the single output.
  std::vector<Eigen::Index> head_dims{128, 128, 1024, 1};
  double dropout_rate = 0.5;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 128;
  int max_epochs = 100;
  int patience = 3;
  std::uint64_t seed = 0;
  /// Balanced weights from the training labels when unset.
  std::optional<ClassWeights> class_weights;
  bool standardize_inputs = false;

  /// The architecture and training settings of the reference network.
  static MlpConfig reference();
  bool is_reference_architecture() const;
  /// Throws ValidationError on inconsistent shapes or out-of-range values.
  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

/// Two dense branches (image, text) whose outputs are concatenated, image
/// first, and fed to a dense head ending in a sigmoid unit.
struct MlpModel {
  MlpConfig config;
  std::vector<DenseLayer> image_branch;
  std::vector<DenseLayer> text_branch;
  std::vector<DenseLayer> head;
  /// Per-feature standardization; empty when disabled.
  Eigen::VectorXd image_mean, image_scale, text_mean, text_scale;
  std::vector<EpochLog> training_log;
  int best_epoch = 0;

  /// All layers in a fixed order: image branch, text branch, head.
  std::vector<DenseLayer*> layers();
  std::vector<const DenseLayer*> layers() const;
  bool all_finite() const;
};

/// Column-per-sample data: image and text are dim x n, labels in {0, 1}.
struct MlpData {
  Eigen::MatrixXd image;
  Eigen::MatrixXd text;
  Eigen::VectorXd labels;

  Eigen::Index size() const noexcept { return labels.size(); }
  MlpData subset(const std::vector<Eigen::Index>& columns) const;
};

enum class ForwardMode { kInference, kTrain };

/// Seeded symmetric-uniform fan-in initialization, zero biases.
MlpModel init_mlp(const MlpConfig& config, Rng& rng);

/// Probability of the positive class for one pair. Train mode applies
/// inverted dropout with masks drawn from `rng` (required in train mode).
double forward(const MlpModel& model, const Eigen::VectorXd& image_vec,
               const Eigen::VectorXd& text_vec, ForwardMode mode = ForwardMode::kInference,
               Rng* rng = nullptr);

Eigen::VectorXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& images,
                              const Eigen::MatrixXd& texts,
                              ForwardMode mode = ForwardMode::kInference, Rng* rng = nullptr);

inline constexpr double kLossClampEpsilon = 1e-7;

/// -[w1 y ln p + w0 (1 - y) ln(1 - p)] with p clamped to [eps, 1 - eps].
double bce_loss(double p, int y, const ClassWeights& weights);

/// Mean weighted loss over `data` in inference mode.
double mean_loss(const MlpModel& model, const MlpData& data, const ClassWeights& weights);

struct MlpGradients {
  std::vector<DenseLayer> layers;  // same order as MlpModel::layers()
  double loss = 0.0;
};

/// Gradients of the mean weighted loss over `batch`. Dropout is applied
/// (one mask per call) only when `dropout_rng` is non-null.
MlpGradients gradient(const MlpModel& model, const MlpData& batch, const ClassWeights& weights,
                      Rng* dropout_rng = nullptr);

/// Sign pattern (z > 0) of every hidden pre-activation over the batch, in
/// inference mode. Finite-difference checks use it to skip ReLU kinks.
std::vector<bool> activation_pattern(const MlpModel& model, const MlpData& batch);

/// balanced weights N / (2 N_c) from binary labels; throws if a class is absent.
ClassWeights balanced_weights(const Eigen::VectorXd& labels);

/// Replaces the validation-loss computation, e.g. with a scripted sequence.
using ValidationLossFn = std::function<double(int epoch, const MlpModel& model)>;

/// Adam on seeded mini-batches with early stopping on validation loss.
/// Returns the parameters of the best validation epoch.
MlpModel train_mlp(const MlpConfig& config, const MlpData& train, const MlpData& validation,
                   const ValidationLossFn& validation_loss = {});

void save_mlp(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_mlp(const std::filesystem::path& path);

}  // namespace modpipe
