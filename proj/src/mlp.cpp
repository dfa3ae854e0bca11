#include "modpipe/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "modpipe/error.hpp"

namespace modpipe {

using nlohmann::json;
using nlohmann::ordered_json;

MlpConfig MlpConfig::reference() { return MlpConfig{}; }

bool MlpConfig::is_reference_architecture() const {
  const MlpConfig ref;
  return branch_dims == ref.branch_dims && head_dims == ref.head_dims &&
         dropout_rate == ref.dropout_rate;
}

void MlpConfig::validate() const {
  if (branch_dims.size() < 2) throw ValidationError("branch needs an input and one layer");
  if (head_dims.size() < 2) throw ValidationError("head needs an input and one layer");
  for (auto d : branch_dims) if (d < 1) throw ValidationError("branch widths must be positive");
  for (auto d : head_dims) if (d < 1) throw ValidationError("head widths must be positive");
  if (head_dims.front() != 2 * branch_dims.back()) {
    throw ValidationError("head input width must equal twice the branch output width");
  }
  if (head_dims.back() != 1) throw ValidationError("head must end in a single unit");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ValidationError("dropout_rate must be in [0, 1)");
  }
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (batch_size < 1 || max_epochs < 1 || patience < 1) {
    throw ValidationError("batch_size, max_epochs and patience must be >= 1");
  }
  if (class_weights && !((*class_weights)[0] > 0.0 && (*class_weights)[1] > 0.0)) {
    throw ValidationError("class weights must be positive");
  }
}

std::vector<DenseLayer*> MlpModel::layers() {
  std::vector<DenseLayer*> out;
  for (auto* group : {&image_branch, &text_branch, &head}) {
    for (auto& l : *group) out.push_back(&l);
  }
  return out;
}

std::vector<const DenseLayer*> MlpModel::layers() const {
  std::vector<const DenseLayer*> out;
  for (const auto* group : {&image_branch, &text_branch, &head}) {
    for (const auto& l : *group) out.push_back(&l);
  }
  return out;
}

bool MlpModel::all_finite() const {
  for (const DenseLayer* l : layers()) {
    if (!l->weights.allFinite() || !l->bias.allFinite()) return false;
  }
  return true;
}

MlpData MlpData::subset(const std::vector<Eigen::Index>& columns) const {
  MlpData out;
  const auto n = static_cast<Eigen::Index>(columns.size());
  out.image.resize(image.rows(), n);
  out.text.resize(text.rows(), n);
  out.labels.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index c = columns[static_cast<std::size_t>(k)];
    out.image.col(k) = image.col(c);
    out.text.col(k) = text.col(c);
    out.labels[k] = labels[c];
  }
  return out;
}

namespace {

std::vector<DenseLayer> init_stack(const std::vector<Eigen::Index>& dims, Rng& rng) {
  std::vector<DenseLayer> stack;
  for (std::size_t k = 1; k < dims.size(); ++k) {
    const Eigen::Index in = dims[k - 1];
    const Eigen::Index out = dims[k];
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    DenseLayer layer;
    layer.weights.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
    }
    layer.bias = Eigen::VectorXd::Zero(out);
    stack.push_back(std::move(layer));
  }
  return stack;
}

/// Activations of one dense stack. `pre[k]` is W a + b, `masks[k]` the
/// dropout scale (empty without dropout), `out[k]` the post-activation value.
struct StackTrace {
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> masks;
  std::vector<Eigen::MatrixXd> out;
};

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Eigen::MatrixXd mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) mask(r, c) = rng.uniform() < rate ? 0.0 : keep_scale;
  }
  return mask;
}

/// Runs a stack where every layer is ReLU + dropout except, when
/// `linear_last`, the final layer which stays linear.
Eigen::MatrixXd run_stack(const std::vector<DenseLayer>& stack, const Eigen::MatrixXd& input,
                          bool linear_last, double rate, Rng* rng, StackTrace* trace) {
  Eigen::MatrixXd a = input;
  for (std::size_t k = 0; k < stack.size(); ++k) {
    Eigen::MatrixXd z = (stack[k].weights * a).colwise() + stack[k].bias;
    const bool last_linear = linear_last && k + 1 == stack.size();
    Eigen::MatrixXd mask;
    if (last_linear) {
      a = z;
    } else {
      a = z.cwiseMax(0.0);
      if (rng != nullptr && rate > 0.0) {
        mask = dropout_mask(a.rows(), a.cols(), rate, *rng);
        a = a.cwiseProduct(mask);
      }
    }
    if (trace != nullptr) {
      trace->pre.push_back(std::move(z));
      trace->masks.push_back(std::move(mask));
      trace->out.push_back(a);
    }
  }
  return a;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& mean,
                            const Eigen::VectorXd& scale) {
  if (mean.size() == 0) return x;
  return (x.colwise() - mean).array().colwise() / scale.array();
}

struct ForwardTrace {
  Eigen::MatrixXd image_in, text_in, head_in;
  StackTrace image, text, head;
  Eigen::RowVectorXd prob;
};

void check_inputs(const MlpModel& model, const Eigen::MatrixXd& images,
                  const Eigen::MatrixXd& texts) {
  const Eigen::Index in = model.config.branch_dims.front();
  if (images.rows() != in || texts.rows() != in) {
    throw ContractViolation("mlp expects " + std::to_string(in) + "-dim inputs, got " +
                            std::to_string(images.rows()) + " and " +
                            std::to_string(texts.rows()));
  }
  if (images.cols() != texts.cols()) throw ContractViolation("image/text batch size mismatch");
  if (!images.allFinite() || !texts.allFinite()) throw InputError("mlp input is not finite");
}

Eigen::RowVectorXd run_forward(const MlpModel& model, const Eigen::MatrixXd& images,
                               const Eigen::MatrixXd& texts, Rng* rng, ForwardTrace* trace) {
  check_inputs(model, images, texts);
  const double rate = model.config.dropout_rate;
  const Eigen::MatrixXd img = standardize(images, model.image_mean, model.image_scale);
  const Eigen::MatrixXd txt = standardize(texts, model.text_mean, model.text_scale);
  const Eigen::MatrixXd img_out =
      run_stack(model.image_branch, img, false, rate, rng, trace ? &trace->image : nullptr);
  const Eigen::MatrixXd txt_out =
      run_stack(model.text_branch, txt, false, rate, rng, trace ? &trace->text : nullptr);
  Eigen::MatrixXd joined(img_out.rows() + txt_out.rows(), img_out.cols());
  joined << img_out, txt_out;
  const Eigen::MatrixXd logits =
      run_stack(model.head, joined, true, rate, rng, trace ? &trace->head : nullptr);
  Eigen::RowVectorXd prob = (1.0 / (1.0 + (-logits.row(0).array()).exp())).matrix();
  if (trace != nullptr) {
    trace->image_in = img;
    trace->text_in = txt;
    trace->head_in = joined;
    trace->prob = prob;
  }
  return prob;
}

/// Backpropagates `delta` (gradient w.r.t. the stack output, post-activation)
/// through a stack, writing parameter gradients into `grads`.
Eigen::MatrixXd backprop_stack(const std::vector<DenseLayer>& stack, const StackTrace& trace,
                               const Eigen::MatrixXd& input, Eigen::MatrixXd delta,
                               bool linear_last, std::vector<DenseLayer>& grads) {
  for (std::size_t k = stack.size(); k-- > 0;) {
    const bool last_linear = linear_last && k + 1 == stack.size();
    if (!last_linear) {
      if (trace.masks[k].size() != 0) delta = delta.cwiseProduct(trace.masks[k]);
      delta = delta.cwiseProduct((trace.pre[k].array() > 0.0).cast<double>().matrix());
    }
    const Eigen::MatrixXd& a_prev = k == 0 ? input : trace.out[k - 1];
    grads[k].weights = delta * a_prev.transpose();
    grads[k].bias = delta.rowwise().sum();
    delta = stack[k].weights.transpose() * delta;
  }
  return delta;
}

}  // namespace

MlpModel init_mlp(const MlpConfig& config, Rng& rng) {
  config.validate();
  MlpModel model;
  model.config = config;
  model.image_branch = init_stack(config.branch_dims, rng);
  model.text_branch = init_stack(config.branch_dims, rng);
  model.head = init_stack(config.head_dims, rng);
  return model;
}

Eigen::VectorXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& images,
                              const Eigen::MatrixXd& texts, ForwardMode mode, Rng* rng) {
  if (mode == ForwardMode::kTrain && rng == nullptr) {
    throw ContractViolation("train-mode forward needs a dropout generator");
  }
  return run_forward(model, images, texts, mode == ForwardMode::kTrain ? rng : nullptr, nullptr)
      .transpose();
}

double forward(const MlpModel& model, const Eigen::VectorXd& image_vec,
               const Eigen::VectorXd& text_vec, ForwardMode mode, Rng* rng) {
  return forward_batch(model, image_vec, text_vec, mode, rng)[0];
}

double bce_loss(double p, int y, const ClassWeights& weights) {
  const double q = std::clamp(p, kLossClampEpsilon, 1.0 - kLossClampEpsilon);
  return y == 1 ? -weights[1] * std::log(q) : -weights[0] * std::log(1.0 - q);
}

double mean_loss(const MlpModel& model, const MlpData& data, const ClassWeights& weights) {
  const Eigen::VectorXd p = forward_batch(model, data.image, data.text);
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    total += bce_loss(p[i], data.labels[i] > 0.5 ? 1 : 0, weights);
  }
  return p.size() > 0 ? total / static_cast<double>(p.size()) : 0.0;
}

MlpGradients gradient(const MlpModel& model, const MlpData& batch, const ClassWeights& weights,
                      Rng* dropout_rng) {
  if (batch.size() == 0) throw InputError("gradient of an empty batch");
  ForwardTrace trace;
  const Eigen::RowVectorXd p = run_forward(model, batch.image, batch.text, dropout_rng, &trace);
  const Eigen::Index n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  MlpGradients out;
  Eigen::MatrixXd delta(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = batch.labels[i] > 0.5 ? 1 : 0;
    out.loss += bce_loss(p[i], y, weights) * inv_n;
    const bool clamped = p[i] < kLossClampEpsilon || p[i] > 1.0 - kLossClampEpsilon;
    delta(0, i) = clamped ? 0.0 : weights[y] * (p[i] - y) * inv_n;
  }

  std::vector<DenseLayer> head_g(model.head.size());
  std::vector<DenseLayer> image_g(model.image_branch.size());
  std::vector<DenseLayer> text_g(model.text_branch.size());
  const Eigen::MatrixXd d_joined =
      backprop_stack(model.head, trace.head, trace.head_in, delta, true, head_g);
  const Eigen::Index split = model.image_branch.back().weights.rows();
  backprop_stack(model.image_branch, trace.image, trace.image_in, d_joined.topRows(split), false,
                 image_g);
  backprop_stack(model.text_branch, trace.text, trace.text_in,
                 d_joined.bottomRows(d_joined.rows() - split), false, text_g);

  for (auto* group : {&image_g, &text_g, &head_g}) {
    for (auto& l : *group) out.layers.push_back(std::move(l));
  }
  return out;
}

std::vector<bool> activation_pattern(const MlpModel& model, const MlpData& batch) {
  ForwardTrace trace;
  run_forward(model, batch.image, batch.text, nullptr, &trace);
  std::vector<bool> pattern;
  for (const StackTrace* st : {&trace.image, &trace.text, &trace.head}) {
    const std::size_t hidden = st == &trace.head ? st->pre.size() - 1 : st->pre.size();
    for (std::size_t k = 0; k < hidden; ++k) {
      const auto& z = st->pre[k];
      for (Eigen::Index i = 0; i < z.size(); ++i) pattern.push_back(z.data()[i] > 0.0);
    }
  }
  return pattern;
}

ClassWeights balanced_weights(const Eigen::VectorXd& labels) {
  const double n = static_cast<double>(labels.size());
  const double pos = (labels.array() > 0.5).cast<double>().sum();
  const double neg = n - pos;
  if (pos == 0.0 || neg == 0.0) {
    throw InputError("balanced class weights need both classes in the training labels");
  }
  return {n / (2.0 * neg), n / (2.0 * pos)};
}

namespace {

struct AdamState {
  std::vector<DenseLayer> m, v;
  std::int64_t step = 0;
};

AdamState make_adam(const MlpModel& model) {
  AdamState s;
  for (const DenseLayer* l : model.layers()) {
    DenseLayer zero{Eigen::MatrixXd::Zero(l->weights.rows(), l->weights.cols()),
                    Eigen::VectorXd::Zero(l->bias.size())};
    s.m.push_back(zero);
    s.v.push_back(std::move(zero));
  }
  return s;
}

void adam_step(MlpModel& model, const MlpGradients& g, AdamState& s, const MlpConfig& c) {
  ++s.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
  const auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
    param.array() -= c.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + c.adam_epsilon);
  };
  auto params = model.layers();
  for (std::size_t k = 0; k < params.size(); ++k) {
    update(params[k]->weights, g.layers[k].weights, s.m[k].weights, s.v[k].weights);
    update(params[k]->bias, g.layers[k].bias, s.m[k].bias, s.v[k].bias);
  }
}

void check_data(const MlpData& data, const char* what) {
  if (data.size() == 0) throw InputError(std::string(what) + " set is empty");
  if (data.image.cols() != data.size() || data.text.cols() != data.size()) {
    throw ContractViolation(std::string(what) + " set has inconsistent sizes");
  }
  for (Eigen::Index i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] != 0.0 && data.labels[i] != 1.0) {
      throw InputError(std::string(what) + " labels must be 0 or 1");
    }
  }
}

void fit_standardization(const Eigen::MatrixXd& x, Eigen::VectorXd& mean, Eigen::VectorXd& scale) {
  mean = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - mean;
  scale = (centered.array().square().rowwise().sum() / static_cast<double>(x.cols())).sqrt().matrix();
  for (Eigen::Index i = 0; i < scale.size(); ++i) if (!(scale[i] > 0.0)) scale[i] = 1.0;
}

}  // namespace

MlpModel train_mlp(const MlpConfig& config, const MlpData& train, const MlpData& validation,
                   const ValidationLossFn& validation_loss) {
  config.validate();
  check_data(train, "training");
  check_data(validation, "validation");
  Rng rng(config.seed);
  MlpModel model = init_mlp(config, rng);
  if (config.standardize_inputs) {
    fit_standardization(train.image, model.image_mean, model.image_scale);
    fit_standardization(train.text, model.text_mean, model.text_scale);
  }
  const ClassWeights weights = config.class_weights ? *config.class_weights : balanced_weights(train.labels);

  AdamState adam = make_adam(model);
  MlpModel best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;
  std::vector<EpochLog> log;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const MlpData batch = train.subset({order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(stop)});
      const MlpGradients g = gradient(model, batch, weights, &rng);
      ++batch_index;
      if (!std::isfinite(g.loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
      }
      epoch_loss += g.loss * static_cast<double>(stop - start);
      adam_step(model, g, adam, config);
    }
    epoch_loss /= static_cast<double>(train.size());
    const double val_loss = validation_loss ? validation_loss(epoch, model)
                                            : mean_loss(model, validation, weights);
    if (!std::isfinite(val_loss)) {
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    log.push_back({epoch, epoch_loss, val_loss});
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = model;
      best.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  best.training_log = std::move(log);
  return best;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr int kMlpFormatVersion = 1;

ordered_json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd json_vec(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

ordered_json stack_json(const std::vector<DenseLayer>& stack) {
  ordered_json out = ordered_json::array();
  for (const auto& l : stack) {
    ordered_json layer;
    layer["rows"] = l.weights.rows();
    layer["cols"] = l.weights.cols();
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) flat.push_back(l.weights(r, c));
    }
    layer["weights"] = std::move(flat);
    layer["bias"] = vec_json(l.bias);
    out.push_back(std::move(layer));
  }
  return out;
}

std::vector<DenseLayer> json_stack(const json& j, const std::vector<Eigen::Index>& dims) {
  if (j.size() + 1 != dims.size()) throw ParseError("layer count does not match config");
  std::vector<DenseLayer> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto rows = j[k].at("rows").get<Eigen::Index>();
    const auto cols = j[k].at("cols").get<Eigen::Index>();
    if (rows != dims[k + 1] || cols != dims[k]) throw ParseError("layer shape does not match config");
    const auto flat = j[k].at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw ParseError("weight count mismatch");
    DenseLayer l;
    l.weights.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) l.weights(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
    }
    l.bias = json_vec(j[k].at("bias"));
    if (l.bias.size() != rows) throw ParseError("bias length mismatch");
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace

void save_mlp(const MlpModel& model, const std::filesystem::path& path) {
  const MlpConfig& c = model.config;
  ordered_json doc;
  doc["format"] = "modpipe-mlp";
  doc["version"] = kMlpFormatVersion;
  ordered_json cfg;
  cfg["branch_dims"] = c.branch_dims;
  cfg["head_dims"] = c.head_dims;
  cfg["dropout_rate"] = c.dropout_rate;
  cfg["learning_rate"] = c.learning_rate;
  cfg["beta1"] = c.beta1;
  cfg["beta2"] = c.beta2;
  cfg["adam_epsilon"] = c.adam_epsilon;
  cfg["batch_size"] = c.batch_size;
  cfg["max_epochs"] = c.max_epochs;
  cfg["patience"] = c.patience;
  cfg["seed"] = c.seed;
  cfg["class_weights"] = c.class_weights ? ordered_json(*c.class_weights) : ordered_json(nullptr);
  cfg["standardize_inputs"] = c.standardize_inputs;
  doc["config"] = std::move(cfg);
  doc["image_branch"] = stack_json(model.image_branch);
  doc["text_branch"] = stack_json(model.text_branch);
  doc["head"] = stack_json(model.head);
  ordered_json standardization = nullptr;
  if (model.image_mean.size() > 0) {
    standardization = ordered_json::object();
    standardization["image_mean"] = vec_json(model.image_mean);
    standardization["image_scale"] = vec_json(model.image_scale);
    standardization["text_mean"] = vec_json(model.text_mean);
    standardization["text_scale"] = vec_json(model.text_scale);
  }
  doc["standardization"] = std::move(standardization);
  ordered_json log = ordered_json::array();
  for (const auto& e : model.training_log) {
    log.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_loss", e.validation_loss}});
  }
  doc["training_log"] = std::move(log);
  doc["best_epoch"] = model.best_epoch;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump() << '\n';
}

MlpModel load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open model file " + path.string());
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "modpipe-mlp") throw ParseError("not an mlp model file");
    if (doc.at("version").get<int>() != kMlpFormatVersion) throw ParseError("unsupported mlp model version");
    const json& cfg = doc.at("config");
    MlpModel m;
    MlpConfig& c = m.config;
    c.branch_dims = cfg.at("branch_dims").get<std::vector<Eigen::Index>>();
    c.head_dims = cfg.at("head_dims").get<std::vector<Eigen::Index>>();
    c.dropout_rate = cfg.at("dropout_rate").get<double>();
    c.learning_rate = cfg.at("learning_rate").get<double>();
    c.beta1 = cfg.at("beta1").get<double>();
    c.beta2 = cfg.at("beta2").get<double>();
    c.adam_epsilon = cfg.at("adam_epsilon").get<double>();
    c.batch_size = cfg.at("batch_size").get<int>();
    c.max_epochs = cfg.at("max_epochs").get<int>();
    c.patience = cfg.at("patience").get<int>();
    c.seed = cfg.at("seed").get<std::uint64_t>();
    if (!cfg.at("class_weights").is_null()) c.class_weights = cfg.at("class_weights").get<ClassWeights>();
    c.standardize_inputs = cfg.at("standardize_inputs").get<bool>();
    c.validate();
    m.image_branch = json_stack(doc.at("image_branch"), c.branch_dims);
    m.text_branch = json_stack(doc.at("text_branch"), c.branch_dims);
    m.head = json_stack(doc.at("head"), c.head_dims);
    if (const json& s = doc.at("standardization"); !s.is_null()) {
      m.image_mean = json_vec(s.at("image_mean"));
      m.image_scale = json_vec(s.at("image_scale"));
      m.text_mean = json_vec(s.at("text_mean"));
      m.text_scale = json_vec(s.at("text_scale"));
    }
    for (const auto& e : doc.at("training_log")) {
      m.training_log.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                                e.at("validation_loss").get<double>()});
    }
    m.best_epoch = doc.at("best_epoch").get<int>();
    if (!m.all_finite()) throw ParseError("model parameters are not finite");
    return m;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": invalid mlp model: " + e.what());
  }
}

}  // namespace modpipe
