#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace modpipe {

struct GammaScale {};
struct GammaFixed {
  double value = 1.0;
};
using GammaMode = std::variant<GammaScale, GammaFixed>;

enum class ClassWeightMode { kBalanced, kUniform };

struct SvmHyperparams {
  double C = 0.1;
  GammaMode gamma = GammaScale{};
  ClassWeightMode class_weight = ClassWeightMode::kBalanced;
  /// Stop once the maximal KKT violation m(a) - M(a) drops below this.
  double kkt_tolerance = 1e-3;
  /// Iteration budget in sweeps; one sweep is n pair updates.
  int max_passes = 200;

  /// Throws ValidationError on C <= 0, fixed gamma <= 0, and so on.
  void validate() const;
};

/// Binary RBF SVM. Decision f(x) = sum_i coef_i K(sv_i, x) + bias, with
/// coef_i = alpha_i y_i. label_map[0] is the -1 class, label_map[1] the +1 class.
struct SvmModel {
  Eigen::MatrixXd support_vectors;  // n_sv x d
  Eigen::VectorXd dual_coefs;
  double bias = 0.0;
  double gamma = 1.0;
  std::array<std::string, 2> label_map;

  // Training diagnostics.
  bool converged = true;
  std::int64_t iterations = 0;
  double dual_objective = 0.0;

  double decision_function(const Eigen::VectorXd& x) const;
  /// label_map[sign(f(x))], with sign(0) mapped to +1.
  const std::string& predict(const Eigen::VectorXd& x) const;
  Eigen::Index dim() const noexcept { return support_vectors.cols(); }
};

/// 1 / (d * Var(X)) with Var the population variance over all n*d entries.
/// Throws InputError on empty or zero-variance input.
double gamma_scale(const Eigen::MatrixXd& X);

/// w_c = N / (K * N_c) for exactly K = 2 classes.
/// Throws InputError unless exactly two classes are present.
std::map<std::string, double> balanced_class_weights(std::span<const std::string> labels);

/// exp(-gamma * ||x - y||^2). Throws ContractViolation on a dimension mismatch.
double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double gamma);

/// Output of the dual solver on a precomputed kernel.
struct SmoSolution {
  Eigen::VectorXd alpha;
  double rho = 0.0;  // decision uses -rho as bias
  double objective = 0.0;  // dual objective sum(a) - 1/2 a'Qa
  std::int64_t iterations = 0;
  bool converged = true;
};

/// Maximizes the SVM dual for labels y in {-1,+1}^n and per-sample upper
/// bounds, using maximal-violating-pair SMO. Exposed for oracle testing.
SmoSolution solve_smo_dual(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& upper_bounds, double tolerance,
                           std::int64_t max_iterations, std::uint64_t seed);

/// Trains a binary SVM. `positive_label` picks the +1 class; by default the
/// lexicographically larger label is +1.
SvmModel train_smo(const Eigen::MatrixXd& X, std::span<const std::string> labels,
                   const SvmHyperparams& hp, std::uint64_t seed,
                   const std::optional<std::string>& positive_label = std::nullopt);

/// One-vs-rest wrapper for multi-class use; predicts the argmax decision.
struct OneVsRestSvm {
  std::vector<std::string> classes;
  std::vector<SvmModel> models;  // models[k] separates classes[k] (+1) from the rest

  std::vector<double> decision_values(const Eigen::VectorXd& x) const;
  const std::string& predict(const Eigen::VectorXd& x) const;
};

OneVsRestSvm train_one_vs_rest(const Eigen::MatrixXd& X, std::span<const std::string> labels,
                               const SvmHyperparams& hp, std::uint64_t seed);

void save_svm(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_svm(const std::filesystem::path& path);
void save_one_vs_rest(const OneVsRestSvm& model, const std::filesystem::path& path);
OneVsRestSvm load_one_vs_rest(const std::filesystem::path& path);

}  // namespace modpipe
