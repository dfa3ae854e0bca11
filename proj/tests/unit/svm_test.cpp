#include <algorithm>
#include <cmath>
#include <numeric>

#include <doctest.h>

#include "modpipe/embeddings.hpp"
#include "modpipe/error.hpp"
#include "modpipe/random.hpp"
#include "modpipe/svm.hpp"
#include "oracles/dual_qp.hpp"
#include "support.hpp"

using namespace modpipe;

namespace {

struct Instance {
  Eigen::MatrixXd X;
  std::vector<std::string> labels;
};

Instance random_instance(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Instance in;
  in.X.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) in.X(i, j) = rng.normal();
  }
  // both classes present
  for (Eigen::Index i = 0; i < n; ++i) in.labels.push_back(i < 1 ? "a" : i < 2 ? "b" : rng.bernoulli(0.5) ? "a" : "b");
  return in;
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& X, double gamma) {
  Eigen::MatrixXd K(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.rows(); ++j) {
      K(i, j) = std::exp(-gamma * (X.row(i) - X.row(j)).squaredNorm());
    }
  }
  return K;
}

/// Two separable blobs of leaked stub embeddings.
Instance blobs(std::size_t n, std::uint64_t salt) {
  Instance in;
  in.X.resize(static_cast<Eigen::Index>(n), 512);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string label = i % 2 == 0 ? "hateful" : "not_hateful";
    in.X.row(static_cast<Eigen::Index>(i)) =
        stub_embedding(Modality::kText, "blob " + std::to_string(salt) + ":" + std::to_string(i), 0.8, label)
            .values()
            .transpose();
    in.labels.push_back(label);
  }
  return in;
}

double accuracy(const SvmModel& m, const Instance& in) {
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < in.X.rows(); ++i) {
    hits += m.predict(in.X.row(i).transpose()) == in.labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(in.X.rows());
}

}  // namespace

TEST_CASE("gamma scale is 1 / (d * Var)") {
  Eigen::MatrixXd X(2, 2);
  X << 0, 0, 2, 2;  // mean 1, population variance 1
  CHECK(gamma_scale(X) == doctest::Approx(0.5));
  Eigen::MatrixXd Y(3, 1);
  Y << 1, 2, 3;  // variance 2/3
  CHECK(gamma_scale(Y) == doctest::Approx(1.5));
  CHECK_THROWS_AS(gamma_scale(Eigen::MatrixXd::Ones(3, 2)), InputError);
  CHECK_THROWS_AS(gamma_scale(Eigen::MatrixXd(0, 2)), InputError);
}

TEST_CASE("balanced class weights") {
  std::vector<std::string> labels(8, "neg");
  labels.insert(labels.end(), 2, "pos");
  auto w = balanced_class_weights(labels);
  CHECK(w.at("neg") == doctest::Approx(0.625));
  CHECK(w.at("pos") == doctest::Approx(2.5));
  const std::vector<std::string> other{"x", "y", "y", "y"};
  w = balanced_class_weights(other);
  CHECK(w.at("x") == doctest::Approx(2.0));
  CHECK(w.at("y") == doctest::Approx(2.0 / 3.0));
  const std::vector<std::string> one{"x", "x"};
  CHECK_THROWS_AS(balanced_class_weights(one), InputError);
}

TEST_CASE("rbf kernel") {
  Eigen::VectorXd a(2), b(2);
  a << 0, 0;
  b << 1, 0;
  CHECK(rbf_kernel(a, b, 1.0) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
  CHECK(rbf_kernel(a, a, 3.0) == 1.0);
  CHECK_THROWS_AS(rbf_kernel(a, Eigen::VectorXd::Zero(3), 1.0), ContractViolation);
}

TEST_CASE("SMO matches the projected-gradient dual solver on small instances") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.index(9));
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.index(4));
    const Instance in = random_instance(rng, n, d);
    const SvmHyperparams hp;
    const SvmModel model = train_smo(in.X, in.labels, hp, static_cast<std::uint64_t>(trial));

    Eigen::VectorXd y(n), C(n);
    const auto weights = balanced_class_weights(in.labels);
    for (Eigen::Index i = 0; i < n; ++i) {
      y[i] = in.labels[static_cast<std::size_t>(i)] == model.label_map[1] ? 1.0 : -1.0;
      C[i] = hp.C * weights.at(in.labels[static_cast<std::size_t>(i)]);
    }
    const Eigen::MatrixXd K = gram(in.X, gamma_scale(in.X));
    const oracle::DualSolution ref = oracle::solve_dual(K, y, C);
    CHECK(std::abs(model.dual_objective - ref.objective) < 1e-4);
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool smo_positive = model.decision_function(in.X.row(i).transpose()) >= 0.0;
      const bool ref_positive = oracle::decision(ref, K, y, i) >= 0.0;
      CHECK(smo_positive == ref_positive);
    }
  }
}

TEST_CASE("SMO solution is feasible and satisfies the KKT conditions") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance in = random_instance(rng, 12, 3);
    Eigen::VectorXd y(12);
    for (Eigen::Index i = 0; i < 12; ++i) y[i] = in.labels[static_cast<std::size_t>(i)] == "b" ? 1.0 : -1.0;
    const Eigen::VectorXd C = Eigen::VectorXd::Constant(12, 1.0);
    const Eigen::MatrixXd K = gram(in.X, 0.5);
    const double tol = 1e-6;
    const SmoSolution sol = solve_smo_dual(K, y, C, tol, 1000000, 1);
    CHECK(sol.converged);
    CHECK(std::abs(sol.alpha.dot(y)) < 1e-8);
    CHECK(sol.alpha.minCoeff() >= 0.0);
    CHECK((C - sol.alpha).minCoeff() >= 0.0);
    // y_i f(x_i) >= 1 at a = 0, == 1 when free, <= 1 at a = C
    const Eigen::VectorXd f = K * sol.alpha.cwiseProduct(y) - Eigen::VectorXd::Constant(12, sol.rho);
    for (Eigen::Index i = 0; i < 12; ++i) {
      const double margin = y[i] * f[i];
      if (sol.alpha[i] <= 1e-12) CHECK(margin >= 1.0 - 10 * tol);
      else if (sol.alpha[i] >= C[i] - 1e-12) CHECK(margin <= 1.0 + 10 * tol);
      else CHECK(std::abs(margin - 1.0) <= 10 * tol);
    }
  }
}

TEST_CASE("separable blobs are learned and generalize") {
  const Instance train = blobs(200, 1);
  const Instance held_out = blobs(200, 2);
  const SvmModel model = train_smo(train.X, train.labels, SvmHyperparams{}, 0, std::string("hateful"));
  CHECK(model.label_map[1] == "hateful");
  CHECK(accuracy(model, train) == 1.0);
  CHECK(accuracy(model, held_out) >= 0.9);
}

TEST_CASE("duplicating the dataset keeps the sign pattern on a probe grid") {
  // Duplicating every point is the same dual with C doubled, so the property
  // holds when no multiplier sits at its bound: separable data, large C.
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    Instance in;
    in.X.resize(10, 2);
    for (Eigen::Index i = 0; i < 10; ++i) {
      const bool pos = i % 2 == 0;
      in.X(i, 0) = (pos ? 2.0 : -2.0) + 0.5 * rng.normal();
      in.X(i, 1) = rng.normal();
      in.labels.push_back(pos ? "b" : "a");
    }
    Instance twice;
    twice.X.resize(20, 2);
    twice.X << in.X, in.X;
    twice.labels = in.labels;
    twice.labels.insert(twice.labels.end(), in.labels.begin(), in.labels.end());
    SvmHyperparams hp;
    hp.C = 1000.0;
    hp.class_weight = ClassWeightMode::kUniform;
    hp.kkt_tolerance = 1e-10;
    hp.gamma = GammaFixed{0.5};
    const SvmModel a = train_smo(in.X, in.labels, hp, 1);
    const SvmModel b = train_smo(twice.X, twice.labels, hp, 2);
    REQUIRE(a.dual_coefs.cwiseAbs().maxCoeff() < hp.C);
    for (double u = -4.0; u <= 4.0; u += 0.25) {
      for (double v = -4.0; v <= 4.0; v += 0.25) {
        Eigen::VectorXd x(2);
        x << u, v;
        const double fa = a.decision_function(x);
        const double fb = b.decision_function(x);
        if (std::abs(fa) > 1e-6) CHECK((fa >= 0.0) == (fb >= 0.0));
      }
    }
  }
}

TEST_CASE("row permutation does not change the decision function") {
  Rng rng(13);
  const Instance in = random_instance(rng, 10, 3);
  std::vector<Eigen::Index> order(10);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  Instance shuffled;
  shuffled.X.resize(10, 3);
  for (Eigen::Index i = 0; i < 10; ++i) {
    shuffled.X.row(i) = in.X.row(order[static_cast<std::size_t>(i)]);
    shuffled.labels.push_back(in.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  }
  SvmHyperparams hp;
  hp.kkt_tolerance = 1e-9;
  const SvmModel a = train_smo(in.X, in.labels, hp, 3);
  const SvmModel b = train_smo(shuffled.X, shuffled.labels, hp, 4);
  CHECK(a.dual_objective == doctest::Approx(b.dual_objective).epsilon(1e-7));
  for (Eigen::Index i = 0; i < 10; ++i) {
    const Eigen::VectorXd x = in.X.row(i).transpose();
    CHECK(a.decision_function(x) == doctest::Approx(b.decision_function(x)).epsilon(1e-5));
  }
}

TEST_CASE("predict follows the sign of the decision function") {
  const Instance train = blobs(60, 3);
  const SvmModel model = train_smo(train.X, train.labels, SvmHyperparams{}, 0);
  const Instance probe = blobs(40, 4);
  for (Eigen::Index i = 0; i < probe.X.rows(); ++i) {
    const Eigen::VectorXd x = probe.X.row(i).transpose();
    CHECK(model.predict(x) == model.label_map[model.decision_function(x) >= 0.0 ? 1 : 0]);
  }
}

TEST_CASE("saved models reload bit-exactly") {
  testing::TempDir dir;
  const Instance train = blobs(40, 5);
  const SvmModel model = train_smo(train.X, train.labels, SvmHyperparams{}, 0);
  save_svm(model, dir / "svm.json");
  const SvmModel back = load_svm(dir / "svm.json");
  CHECK(back.support_vectors == model.support_vectors);
  CHECK(back.dual_coefs == model.dual_coefs);
  CHECK(back.bias == model.bias);
  CHECK(back.gamma == model.gamma);
  CHECK(back.label_map == model.label_map);
  const Instance probe = blobs(10, 6);
  for (Eigen::Index i = 0; i < probe.X.rows(); ++i) {
    const Eigen::VectorXd x = probe.X.row(i).transpose();
    CHECK(back.decision_function(x) == model.decision_function(x));
  }
  CHECK_THROWS_AS(load_svm(dir / "absent.json"), MissingInputError);
}

TEST_CASE("one-vs-rest over three classes") {
  Instance in;
  in.X.resize(90, 512);
  const char* names[] = {"hope", "hate", "not_applicable"};
  for (int i = 0; i < 90; ++i) {
    in.labels.push_back(names[i % 3]);
    in.X.row(i) = stub_embedding(Modality::kText, "ovr" + std::to_string(i), 0.8, in.labels.back())
                      .values()
                      .transpose();
  }
  const OneVsRestSvm model = train_one_vs_rest(in.X, in.labels, SvmHyperparams{}, 0);
  CHECK(model.classes.size() == 3);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < 90; ++i) hits += model.predict(in.X.row(i).transpose()) == in.labels[static_cast<std::size_t>(i)];
  CHECK(hits == 90);
  testing::TempDir dir;
  save_one_vs_rest(model, dir / "ovr.json");
  const OneVsRestSvm back = load_one_vs_rest(dir / "ovr.json");
  CHECK(back.classes == model.classes);
  CHECK(back.decision_values(in.X.row(0).transpose()) == model.decision_values(in.X.row(0).transpose()));
}

TEST_CASE("hyperparameter and input validation") {
  SvmHyperparams hp;
  hp.C = 0.0;
  CHECK_THROWS_AS(hp.validate(), ValidationError);
  hp = SvmHyperparams{};
  hp.gamma = GammaFixed{-1.0};
  CHECK_THROWS_AS(hp.validate(), ValidationError);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 2);
  const std::vector<std::string> one_class{"a", "a", "a"};
  CHECK_THROWS_AS(train_smo(X, one_class, SvmHyperparams{}, 0), InputError);
  const std::vector<std::string> short_labels{"a", "b"};
  CHECK_THROWS_AS(train_smo(X, short_labels, SvmHyperparams{}, 0), ContractViolation);
}
