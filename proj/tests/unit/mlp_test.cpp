#include <cmath>
#include <limits>

#include <doctest.h>

#include "modpipe/error.hpp"
#include "modpipe/mlp.hpp"
#include "oracles/finite_difference.hpp"
#include "support.hpp"

using namespace modpipe;

namespace {

MlpConfig small_config() {
  MlpConfig c;
  c.branch_dims = {6, 5, 4};
  c.head_dims = {8, 5, 1};
  c.batch_size = 8;
  return c;
}

MlpData sample_data(Eigen::Index dim, Eigen::Index n, Rng& rng) {
  MlpData d;
  d.image.resize(dim, n);
  d.text.resize(dim, n);
  d.labels.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      d.image(i, j) = rng.normal();
      d.text(i, j) = rng.normal();
    }
    d.labels[j] = j < 2 ? static_cast<double>(j) : (rng.bernoulli(0.5) ? 1.0 : 0.0);
  }
  return d;
}

void zero(MlpModel& m) {
  for (DenseLayer* l : m.layers()) {
    l->weights.setZero();
    l->bias.setZero();
  }
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

TEST_CASE("zero weights give probability one half") {
  Rng rng(1);
  MlpModel m = init_mlp(MlpConfig::reference(), rng);
  zero(m);
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(512);
  CHECK(forward(m, x, x) == 0.5);
}

TEST_CASE("outputs lie in the open unit interval") {
  Rng rng(2);
  const MlpModel m = init_mlp(MlpConfig::reference(), rng);
  for (int k = 0; k < 20; ++k) {
    const double scale = std::pow(10.0, k - 10);
    Eigen::VectorXd img(512), txt(512);
    for (Eigen::Index i = 0; i < 512; ++i) {
      img[i] = scale * rng.normal();
      txt[i] = scale * rng.normal();
    }
    const double p = forward(m, img, txt);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(std::isfinite(p));
  }
}

TEST_CASE("weighted binary cross-entropy") {
  CHECK(bce_loss(0.5, 1, {1.0, 1.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce_loss(0.5, 0, {3.0, 1.0}) == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-15));
  CHECK(bce_loss(0.8, 1, {1.0, 2.0}) == doctest::Approx(-2.0 * std::log(0.8)).epsilon(1e-15));
  CHECK(bce_loss(1.0, 0, {1.0, 1.0}) == doctest::Approx(-std::log(kLossClampEpsilon)));
  CHECK(std::isfinite(bce_loss(0.0, 1, {1.0, 1.0})));
}

TEST_CASE("analytic gradients match central differences on a small net") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Rng rng(seed);
    MlpModel m = init_mlp(small_config(), rng);
    for (DenseLayer* l : m.layers()) l->bias.setRandom();
    const MlpData batch = sample_data(6, 7, rng);
    const ClassWeights w{0.7, 1.9};
    const auto result = oracle::check_gradient(m, batch, w, oracle::all_params(m));
    CHECK(result.checked > 100);
    CHECK(result.max_relative_error < 1e-4);
  }
}

TEST_CASE("analytic gradients match central differences on the reference architecture") {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    Rng rng(seed);
    MlpModel m = init_mlp(MlpConfig::reference(), rng);
    const MlpData batch = sample_data(512, 4, rng);
    const ClassWeights w = balanced_weights(batch.labels);
    const auto params = oracle::sample_params(m, 150, rng);
    const auto result = oracle::check_gradient(m, batch, w, params);
    CHECK(result.checked > 100);
    CHECK(result.max_relative_error < 1e-4);
  }
}

TEST_CASE("zeroed network under balanced weights is a stationary point") {
  Rng rng(3);
  MlpModel m = init_mlp(small_config(), rng);
  zero(m);
  const MlpData batch = sample_data(6, 10, rng);
  const MlpGradients g = gradient(m, batch, balanced_weights(batch.labels));
  for (const DenseLayer& l : g.layers) {
    CHECK(l.weights.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(l.bias.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
}

TEST_CASE("gradient is linear in the class weights") {
  Rng rng(4);
  const MlpModel m = init_mlp(small_config(), rng);
  const MlpData batch = sample_data(6, 9, rng);
  const MlpGradients g0 = gradient(m, batch, {1.0, 0.0});
  const MlpGradients g1 = gradient(m, batch, {0.0, 1.0});
  const MlpGradients g = gradient(m, batch, {0.3, 2.5});
  CHECK(g.loss == doctest::Approx(0.3 * g0.loss + 2.5 * g1.loss).epsilon(1e-12));
  for (std::size_t k = 0; k < g.layers.size(); ++k) {
    const Eigen::MatrixXd combined = 0.3 * g0.layers[k].weights + 2.5 * g1.layers[k].weights;
    CHECK((g.layers[k].weights - combined).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dropout preserves the expected logit when followed by linear maps") {
  // One ReLU layer per branch, then a single linear unit: the logit is linear
  // in the dropped activations, so inverted dropout keeps its mean exactly.
  MlpConfig c;
  c.branch_dims = {8, 6};
  c.head_dims = {12, 1};
  Rng rng(6);
  const MlpModel m = init_mlp(c, rng);
  Eigen::VectorXd img(8), txt(8);
  for (Eigen::Index i = 0; i < 8; ++i) {
    img[i] = std::abs(rng.normal());
    txt[i] = std::abs(rng.normal());
  }
  const double exact = logit(forward(m, img, txt));
  const int draws = 40000;
  double sum = 0.0, sum_sq = 0.0;
  Rng masks(7);
  for (int k = 0; k < draws; ++k) {
    const double z = logit(forward(m, img, txt, ForwardMode::kTrain, &masks));
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / draws;
  const double stderr_ = std::sqrt((sum_sq / draws - mean * mean) / draws);
  CHECK(std::abs(mean - exact) < 5.0 * stderr_ + 1e-12);
  CHECK_THROWS_AS(forward(m, img, txt, ForwardMode::kTrain, nullptr), ContractViolation);
}

TEST_CASE("early stopping returns the best-validation weights") {
  Rng rng(8);
  const MlpData train = sample_data(6, 16, rng);
  const MlpData validation = sample_data(6, 4, rng);
  MlpConfig c = small_config();
  c.seed = 11;
  const std::vector<double> script{0.5, 0.4, 0.41, 0.42, 0.43, 0.1, 0.1};
  const MlpModel model = train_mlp(c, train, validation, [&](int epoch, const MlpModel&) {
    return script.at(static_cast<std::size_t>(epoch - 1));
  });
  CHECK(model.training_log.size() == 5);
  CHECK(model.best_epoch == 2);

  c.max_epochs = 2;
  const MlpModel two_epochs = train_mlp(c, train, validation, [&](int epoch, const MlpModel&) {
    return script.at(static_cast<std::size_t>(epoch - 1));
  });
  const auto a = model.layers();
  const auto b = two_epochs.layers();
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k]->weights == b[k]->weights);
    CHECK(a[k]->bias == b[k]->bias);
  }
}

TEST_CASE("reference network overfits 32 samples") {
  Rng rng(12);
  const MlpData data = sample_data(512, 32, rng);
  MlpConfig c = MlpConfig::reference();
  c.seed = 3;
  const MlpModel model = train_mlp(c, data, data, [](int epoch, const MlpModel&) { return -epoch; });
  const Eigen::VectorXd p = forward_batch(model, data.image, data.text);
  int hits = 0;
  for (Eigen::Index j = 0; j < 32; ++j) hits += (p[j] >= 0.5) == (data.labels[j] == 1.0);
  CHECK(hits >= 32 * 0.99);
}

TEST_CASE("training is deterministic for a seed") {
  Rng rng(21);
  const MlpData train = sample_data(6, 20, rng);
  const MlpData validation = sample_data(6, 6, rng);
  MlpConfig c = small_config();
  c.seed = 5;
  c.max_epochs = 8;
  const MlpModel a = train_mlp(c, train, validation);
  const MlpModel b = train_mlp(c, train, validation);
  for (std::size_t k = 0; k < a.layers().size(); ++k) CHECK(a.layers()[k]->weights == b.layers()[k]->weights);
  c.seed = 6;
  const MlpModel other = train_mlp(c, train, validation);
  CHECK_FALSE(other.layers()[0]->weights == a.layers()[0]->weights);
}

TEST_CASE("non-finite losses abort training") {
  Rng rng(22);
  const MlpData train = sample_data(6, 12, rng);
  MlpConfig c = small_config();
  CHECK_THROWS_AS(train_mlp(c, train, train,
                            [](int, const MlpModel&) { return std::numeric_limits<double>::quiet_NaN(); }),
                  TrainingError);
  MlpData bad = train;
  bad.text(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(train_mlp(c, bad, train), InputError);
}

TEST_CASE("saved networks reload exactly") {
  testing::TempDir dir;
  Rng rng(23);
  const MlpData train = sample_data(6, 12, rng);
  MlpConfig c = small_config();
  c.max_epochs = 3;
  c.standardize_inputs = true;
  const MlpModel model = train_mlp(c, train, train);
  save_mlp(model, dir / "mlp.json");
  const MlpModel back = load_mlp(dir / "mlp.json");
  CHECK(back.best_epoch == model.best_epoch);
  for (Eigen::Index j = 0; j < train.size(); ++j) {
    CHECK(forward(back, train.image.col(j), train.text.col(j)) ==
          forward(model, train.image.col(j), train.text.col(j)));
  }
  CHECK_THROWS_AS(load_mlp(dir / "absent.json"), MissingInputError);
}

TEST_CASE("config validation") {
  MlpConfig c = MlpConfig::reference();
  CHECK(c.is_reference_architecture());
  c.head_dims = {100, 1};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = MlpConfig::reference();
  c.dropout_rate = 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK_THROWS_AS(balanced_weights(Eigen::VectorXd::Ones(4)), InputError);
}
