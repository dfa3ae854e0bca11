#include "modpipe/svm.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "modpipe/error.hpp"
#include "modpipe/random.hpp"

namespace modpipe {

using nlohmann::json;
using nlohmann::ordered_json;

void SvmHyperparams::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw ValidationError("SVM C must be positive");
  if (const auto* fixed = std::get_if<GammaFixed>(&gamma)) {
    if (!(fixed->value > 0.0) || !std::isfinite(fixed->value)) {
      throw ValidationError("fixed gamma must be positive");
    }
  }
  if (!(kkt_tolerance > 0.0)) throw ValidationError("kkt_tolerance must be positive");
  if (max_passes < 1) throw ValidationError("max_passes must be >= 1");
}

double gamma_scale(const Eigen::MatrixXd& X) {
  if (X.size() == 0) throw InputError("gamma=scale needs a non-empty training matrix");
  const double mean = X.mean();
  const double var = (X.array() - mean).square().sum() / static_cast<double>(X.size());
  if (!(var > 0.0)) throw InputError("gamma=scale is undefined for zero-variance data");
  return 1.0 / (static_cast<double>(X.cols()) * var);
}

std::map<std::string, double> balanced_class_weights(std::span<const std::string> labels) {
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) ++counts[l];
  if (counts.size() != 2) {
    throw InputError("balanced class weights need exactly two classes, got " +
                     std::to_string(counts.size()));
  }
  const double n = static_cast<double>(labels.size());
  std::map<std::string, double> weights;
  for (const auto& [label, count] : counts) {
    weights[label] = n / (2.0 * static_cast<double>(count));
  }
  return weights;
}

double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double gamma) {
  if (x.size() != y.size()) {
    throw ContractViolation("rbf kernel dimension mismatch: " + std::to_string(x.size()) +
                            " vs " + std::to_string(y.size()));
  }
  return std::exp(-gamma * (x - y).squaredNorm());
}

namespace {

constexpr double kTau = 1e-12;
constexpr double kBoundSnap = 1e-12;

/// Kernel rows computed on demand and kept in a bounded FIFO cache.
class KernelRows {
 public:
  KernelRows(const Eigen::MatrixXd& X, double gamma, std::size_t budget_bytes)
      : X_(X), gamma_(gamma), rows_(static_cast<std::size_t>(X.rows())) {
    const std::size_t row_bytes = sizeof(double) * static_cast<std::size_t>(std::max<Eigen::Index>(1, X.rows()));
    capacity_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
    sq_norms_ = X.rowwise().squaredNorm();
  }

  const Eigen::VectorXd& row(Eigen::Index i) {
    auto& slot = rows_[static_cast<std::size_t>(i)];
    if (slot.size() == 0) {
      if (order_.size() >= capacity_) {
        rows_[order_.front()].resize(0);
        order_.pop_front();
      }
      Eigen::VectorXd d2 = (sq_norms_.array() + sq_norms_[i]).matrix() - 2.0 * (X_ * X_.row(i).transpose());
      slot = (-gamma_ * d2.array().max(0.0)).exp().matrix();
      slot[i] = 1.0;
      order_.push_back(static_cast<std::size_t>(i));
    }
    return slot;
  }

  double diag(Eigen::Index) const { return 1.0; }

 private:
  const Eigen::MatrixXd& X_;
  double gamma_;
  Eigen::VectorXd sq_norms_;
  std::vector<Eigen::VectorXd> rows_;
  std::deque<std::size_t> order_;
  std::size_t capacity_;
};

class DenseRows {
 public:
  explicit DenseRows(const Eigen::MatrixXd& K) : K_(K) {}
  Eigen::VectorXd row(Eigen::Index i) const { return K_.row(i).transpose(); }
  double diag(Eigen::Index i) const { return K_(i, i); }

 private:
  const Eigen::MatrixXd& K_;
};

/// Maximal-violating-pair SMO on the dual
///   min f(a) = 1/2 a'Qa - e'a,  Q_ij = y_i y_j K_ij,  0 <= a_i <= C_i,  y'a = 0.
/// G holds the gradient Qa - e. Ties pick the lowest index.
template <typename Rows>
SmoSolution smo_core(Rows& rows, const Eigen::VectorXd& y, const Eigen::VectorXd& C,
                     double tolerance, std::int64_t max_iterations, std::uint64_t seed) {
  const Eigen::Index n = y.size();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);
  Rng rng(seed);

  const auto in_up = [&](Eigen::Index t) {
    return (y[t] > 0 && alpha[t] < C[t]) || (y[t] < 0 && alpha[t] > 0);
  };
  const auto in_low = [&](Eigen::Index t) {
    return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C[t]);
  };

  // Two-variable update for the pair (i, j), libsvm-style clipping.
  const auto update_pair = [&](Eigen::Index i, Eigen::Index j, const auto& Ki, const auto& Kj) {
    const double old_i = alpha[i];
    const double old_j = alpha[j];
    const double Qij = y[i] * y[j] * Ki[j];
    const double Ci = C[i];
    const double Cj = C[j];
    if (y[i] != y[j]) {
      double quad = rows.diag(i) + rows.diag(j) + 2.0 * Qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      }
      if (diff > Ci - Cj) {
        if (alpha[i] > Ci) { alpha[i] = Ci; alpha[j] = Ci - diff; }
      } else {
        if (alpha[j] > Cj) { alpha[j] = Cj; alpha[i] = Cj + diff; }
      }
    } else {
      double quad = rows.diag(i) + rows.diag(j) - 2.0 * Qij;
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > Ci) {
        if (alpha[i] > Ci) { alpha[i] = Ci; alpha[j] = sum - Ci; }
      } else {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
      }
      if (sum > Cj) {
        if (alpha[j] > Cj) { alpha[j] = Cj; alpha[i] = sum - Cj; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
      }
    }
    // Clipping arithmetic such as Cj + diff can land an ulp short of a bound,
    // which would later count the variable as free when computing rho.
    for (const Eigen::Index t : {i, j}) {
      if (alpha[t] > C[t] * (1.0 - kBoundSnap)) alpha[t] = C[t];
      else if (alpha[t] < C[t] * kBoundSnap) alpha[t] = 0.0;
    }
    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    if (di == 0.0 && dj == 0.0) return false;
    G.array() += (y[i] * di) * (y.array() * Ki.array()) + (y[j] * dj) * (y.array() * Kj.array());
    return true;
  };

  SmoSolution out;
  out.converged = false;
  std::int64_t iter = 0;
  while (iter < max_iterations) {
    Eigen::Index i = -1;
    Eigen::Index j = -1;
    double m = -std::numeric_limits<double>::infinity();
    double M = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y[t] * G[t];
      if (in_up(t) && v > m) { m = v; i = t; }
      if (in_low(t) && v < M) { M = v; j = t; }
    }
    if (i < 0 || j < 0 || m - M < tolerance) {
      out.converged = true;
      break;
    }
    ++iter;
    const Eigen::VectorXd Ki = rows.row(i);
    const Eigen::VectorXd Kj = rows.row(j);
    if (update_pair(i, j, Ki, Kj)) continue;

    // No progress on the greedy pair: retry with a random violating partner.
    std::vector<Eigen::Index> candidates;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (t != i && in_low(t) && -y[t] * G[t] < m - tolerance) candidates.push_back(t);
    }
    if (candidates.empty()) break;
    const Eigen::Index r = candidates[rng.index(candidates.size())];
    const Eigen::VectorXd Kr = rows.row(r);
    if (!update_pair(i, r, Ki, Kr)) break;
  }

  // rho: mean of y_t G_t over free variables, else midpoint of the feasible range.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yG = y[t] * G[t];
    if (alpha[t] >= C[t]) {
      if (y[t] < 0) ub = std::min(ub, yG); else lb = std::max(lb, yG);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yG); else lb = std::max(lb, yG);
    } else {
      ++n_free;
      sum_free += yG;
    }
  }
  out.rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
  out.objective = -0.5 * alpha.dot(G - Eigen::VectorXd::Ones(n));
  out.alpha = std::move(alpha);
  out.iterations = iter;
  return out;
}

}  // namespace

SmoSolution solve_smo_dual(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& upper_bounds, double tolerance,
                           std::int64_t max_iterations, std::uint64_t seed) {
  if (kernel.rows() != kernel.cols() || kernel.rows() != y.size() ||
      upper_bounds.size() != y.size()) {
    throw ContractViolation("solve_smo_dual: inconsistent shapes");
  }
  DenseRows rows(kernel);
  return smo_core(rows, y, upper_bounds, tolerance, max_iterations, seed);
}

double SvmModel::decision_function(const Eigen::VectorXd& x) const {
  if (x.size() != support_vectors.cols()) {
    throw ContractViolation("svm input has " + std::to_string(x.size()) +
                            " dimensions, model expects " +
                            std::to_string(support_vectors.cols()));
  }
  const Eigen::VectorXd d2 =
      (support_vectors.rowwise() - x.transpose()).rowwise().squaredNorm();
  return dual_coefs.dot((-gamma * d2.array()).exp().matrix()) + bias;
}

const std::string& SvmModel::predict(const Eigen::VectorXd& x) const {
  return decision_function(x) >= 0.0 ? label_map[1] : label_map[0];
}

SvmModel train_smo(const Eigen::MatrixXd& X, std::span<const std::string> labels,
                   const SvmHyperparams& hp, std::uint64_t seed,
                   const std::optional<std::string>& positive_label) {
  hp.validate();
  if (static_cast<std::size_t>(X.rows()) != labels.size()) {
    throw ContractViolation("svm training: " + std::to_string(X.rows()) + " rows but " +
                            std::to_string(labels.size()) + " labels");
  }
  if (!X.allFinite()) throw InputError("svm training data contains non-finite values");
  std::set<std::string> distinct(labels.begin(), labels.end());
  if (distinct.size() != 2) {
    throw InputError("svm training needs exactly two classes, got " +
                     std::to_string(distinct.size()));
  }
  SvmModel model;
  model.label_map = {*distinct.begin(), *distinct.rbegin()};
  if (positive_label) {
    if (!distinct.contains(*positive_label)) {
      throw InputError("positive label '" + *positive_label + "' absent from training data");
    }
    if (*positive_label == model.label_map[0]) std::swap(model.label_map[0], model.label_map[1]);
  }

  const Eigen::Index n = X.rows();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = labels[static_cast<std::size_t>(i)] == model.label_map[1] ? 1.0 : -1.0;
  }
  Eigen::VectorXd C = Eigen::VectorXd::Constant(n, hp.C);
  if (hp.class_weight == ClassWeightMode::kBalanced) {
    const auto weights = balanced_class_weights(labels);
    for (Eigen::Index i = 0; i < n; ++i) C[i] *= weights.at(labels[static_cast<std::size_t>(i)]);
  }
  model.gamma = std::holds_alternative<GammaScale>(hp.gamma) ? gamma_scale(X)
                                                             : std::get<GammaFixed>(hp.gamma).value;

  KernelRows rows(X, model.gamma, std::size_t{512} << 20);
  const std::int64_t budget = static_cast<std::int64_t>(hp.max_passes) * std::max<Eigen::Index>(n, 1);
  const SmoSolution sol = smo_core(rows, y, C, hp.kkt_tolerance, budget, seed);

  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sol.alpha[i] > 0.0) sv.push_back(i);
  }
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
  model.dual_coefs.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    model.support_vectors.row(static_cast<Eigen::Index>(k)) = X.row(sv[k]);
    model.dual_coefs[static_cast<Eigen::Index>(k)] = sol.alpha[sv[k]] * y[sv[k]];
  }
  model.bias = -sol.rho;
  model.converged = sol.converged;
  model.iterations = sol.iterations;
  model.dual_objective = sol.objective;
  return model;
}

std::vector<double> OneVsRestSvm::decision_values(const Eigen::VectorXd& x) const {
  std::vector<double> out;
  out.reserve(models.size());
  for (const auto& m : models) out.push_back(m.decision_function(x));
  return out;
}

const std::string& OneVsRestSvm::predict(const Eigen::VectorXd& x) const {
  const auto values = decision_values(x);
  const auto best = std::max_element(values.begin(), values.end());
  return classes[static_cast<std::size_t>(best - values.begin())];
}

OneVsRestSvm train_one_vs_rest(const Eigen::MatrixXd& X, std::span<const std::string> labels,
                               const SvmHyperparams& hp, std::uint64_t seed) {
  std::set<std::string> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw InputError("one-vs-rest needs at least two classes");
  OneVsRestSvm out;
  out.classes.assign(distinct.begin(), distinct.end());
  if (distinct.size() == 2) {
    // Two classes: one binary machine, mirrored for the second class.
    SvmModel m = train_smo(X, labels, hp, seed, out.classes[0]);
    SvmModel mirrored = m;
    mirrored.dual_coefs = -m.dual_coefs;
    mirrored.bias = -m.bias;
    std::swap(mirrored.label_map[0], mirrored.label_map[1]);
    out.models = {std::move(m), std::move(mirrored)};
    return out;
  }
  static const std::string kRest = "<rest>";
  for (std::size_t k = 0; k < out.classes.size(); ++k) {
    std::vector<std::string> binary;
    binary.reserve(labels.size());
    for (const auto& l : labels) binary.push_back(l == out.classes[k] ? l : kRest);
    out.models.push_back(train_smo(X, binary, hp, mix_seed(seed, k), out.classes[k]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr int kSvmFormatVersion = 1;

ordered_json svm_to_json(const SvmModel& m) {
  ordered_json doc;
  doc["format"] = "modpipe-svm";
  doc["version"] = kSvmFormatVersion;
  doc["gamma"] = m.gamma;
  doc["bias"] = m.bias;
  doc["label_map"] = {{"-1", m.label_map[0]}, {"+1", m.label_map[1]}};
  doc["converged"] = m.converged;
  doc["iterations"] = m.iterations;
  doc["dual_objective"] = m.dual_objective;
  doc["dim"] = m.support_vectors.cols();
  doc["dual_coefs"] = std::vector<double>(m.dual_coefs.data(), m.dual_coefs.data() + m.dual_coefs.size());
  ordered_json svs = ordered_json::array();
  for (Eigen::Index r = 0; r < m.support_vectors.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.support_vectors.cols()));
    for (Eigen::Index c = 0; c < m.support_vectors.cols(); ++c) row[static_cast<std::size_t>(c)] = m.support_vectors(r, c);
    svs.push_back(std::move(row));
  }
  doc["support_vectors"] = std::move(svs);
  return doc;
}

SvmModel svm_from_json(const json& doc) {
  try {
    if (doc.at("format") != "modpipe-svm") throw ParseError("not an svm model file");
    if (doc.at("version").get<int>() != kSvmFormatVersion) {
      throw ParseError("unsupported svm model version");
    }
    SvmModel m;
    m.gamma = doc.at("gamma").get<double>();
    m.bias = doc.at("bias").get<double>();
    m.label_map = {doc.at("label_map").at("-1").get<std::string>(),
                   doc.at("label_map").at("+1").get<std::string>()};
    m.converged = doc.at("converged").get<bool>();
    m.iterations = doc.at("iterations").get<std::int64_t>();
    m.dual_objective = doc.at("dual_objective").get<double>();
    const auto dim = doc.at("dim").get<Eigen::Index>();
    const auto coefs = doc.at("dual_coefs").get<std::vector<double>>();
    const auto& svs = doc.at("support_vectors");
    if (svs.size() != coefs.size()) throw ParseError("support vector / coefficient count mismatch");
    m.dual_coefs = Eigen::Map<const Eigen::VectorXd>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
    m.support_vectors.resize(static_cast<Eigen::Index>(svs.size()), dim);
    for (std::size_t r = 0; r < svs.size(); ++r) {
      const auto row = svs[r].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != dim) throw ParseError("support vector width mismatch");
      for (Eigen::Index c = 0; c < dim; ++c) m.support_vectors(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid svm model: ") + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open model file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text << '\n';
}

}  // namespace

void save_svm(const SvmModel& model, const std::filesystem::path& path) {
  write_text_file(path, svm_to_json(model).dump());
}

SvmModel load_svm(const std::filesystem::path& path) { return svm_from_json(read_json_file(path)); }

void save_one_vs_rest(const OneVsRestSvm& model, const std::filesystem::path& path) {
  ordered_json doc;
  doc["format"] = "modpipe-svm-ovr";
  doc["version"] = kSvmFormatVersion;
  doc["classes"] = model.classes;
  ordered_json models = ordered_json::array();
  for (const auto& m : model.models) models.push_back(svm_to_json(m));
  doc["models"] = std::move(models);
  write_text_file(path, doc.dump());
}

OneVsRestSvm load_one_vs_rest(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  try {
    if (doc.at("format") != "modpipe-svm-ovr") throw ParseError("not a one-vs-rest model file");
    OneVsRestSvm out;
    out.classes = doc.at("classes").get<std::vector<std::string>>();
    for (const auto& m : doc.at("models")) out.models.push_back(svm_from_json(m));
    if (out.models.size() != out.classes.size()) throw ParseError("class / model count mismatch");
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid one-vs-rest model: ") + e.what());
  }
}

}  // namespace modpipe
