#include <doctest.h>

#include "modpipe/error.hpp"
#include "modpipe/fusion.hpp"

using namespace modpipe;

namespace {

EmbeddingVector filled(double value) { return EmbeddingVector(Eigen::VectorXd::Constant(512, value)); }

}  // namespace

TEST_CASE("average of a vector with itself is the vector") {
  const EmbeddingVector v = stub_embedding(Modality::kText, "x");
  const Eigen::VectorXd out = fuse(v, v, FusionMode::kAverage);
  CHECK(out.size() == 512);
  CHECK(out == v.values());
}

TEST_CASE("average is element-wise") {
  const Eigen::VectorXd out = fuse(filled(1.0), filled(3.0), FusionMode::kAverage);
  CHECK(out == Eigen::VectorXd::Constant(512, 2.0));
}

TEST_CASE("concatenate stacks text then image") {
  const Eigen::VectorXd out = fuse(filled(1.0), filled(-1.0), FusionMode::kConcatenate);
  REQUIRE(out.size() == 1024);
  CHECK(out.head(512) == Eigen::VectorXd::Constant(512, 1.0));
  CHECK(out.tail(512) == Eigen::VectorXd::Constant(512, -1.0));
}

TEST_CASE("single-modality modes pass the vector through") {
  const EmbeddingVector t = stub_embedding(Modality::kText, "t");
  const EmbeddingVector i = stub_embedding(Modality::kImage, "i");
  CHECK(fuse(t, std::nullopt, FusionMode::kTextOnly) == t.values());
  CHECK(fuse(std::nullopt, i, FusionMode::kImageOnly) == i.values());
  CHECK(fuse(t, i, FusionMode::kTextOnly) == t.values());
}

TEST_CASE("missing modality is an input error") {
  const EmbeddingVector t = stub_embedding(Modality::kText, "t");
  CHECK_THROWS_AS(fuse(t, std::nullopt, FusionMode::kAverage), InputError);
  CHECK_THROWS_AS(fuse(std::nullopt, t, FusionMode::kConcatenate), InputError);
  CHECK_THROWS_AS(fuse(std::nullopt, t, FusionMode::kTextOnly), InputError);
  CHECK_THROWS_AS(fuse(t, std::nullopt, FusionMode::kImageOnly), InputError);
}

TEST_CASE("raw vectors of different widths violate the contract") {
  const Eigen::VectorXd a = Eigen::VectorXd::Ones(512);
  const Eigen::VectorXd b = Eigen::VectorXd::Ones(256);
  CHECK_THROWS_AS(fuse_values(&a, &b, FusionMode::kAverage), ContractViolation);
}

TEST_CASE("average commutes") {
  for (int k = 0; k < 20; ++k) {
    const EmbeddingVector a = stub_embedding(Modality::kText, "a" + std::to_string(k));
    const EmbeddingVector b = stub_embedding(Modality::kImage, "b" + std::to_string(k));
    CHECK(fuse(a, b, FusionMode::kAverage) == fuse(b, a, FusionMode::kAverage));
  }
}

TEST_CASE("mode names and widths") {
  for (const auto mode : {FusionMode::kTextOnly, FusionMode::kImageOnly, FusionMode::kAverage,
                          FusionMode::kConcatenate}) {
    CHECK(parse_fusion_mode(to_string(mode)) == mode);
  }
  CHECK_FALSE(parse_fusion_mode("sum").has_value());
  CHECK(fused_dim(FusionMode::kConcatenate) == 1024);
  CHECK(fused_dim(FusionMode::kAverage) == 512);
  CHECK(needs_image(FusionMode::kAverage));
  CHECK_FALSE(needs_image(FusionMode::kTextOnly));
}
