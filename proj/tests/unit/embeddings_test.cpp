#include <set>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "modpipe/digest.hpp"
#include "modpipe/embeddings.hpp"
#include "modpipe/error.hpp"
#include "support.hpp"

using namespace modpipe;

namespace {

class FakeTransport final : public Transport {
 public:
  explicit FakeTransport(std::string body) : body_(std::move(body)) {}
  HttpResponse post(const std::string&, const std::string& request, const Headers&) override {
    ++calls;
    last_request = request;
    return {200, body_};
  }
  int calls = 0;
  std::string last_request;

 private:
  std::string body_;
};

std::string embedding_body(std::size_t n, double value = 0.25) {
  return nlohmann::json{{"embedding", std::vector<double>(n, value)}}.dump();
}

EmbeddingProviderSpec remote_spec() {
  EmbeddingProviderSpec spec;
  spec.kind = ProviderKind::kRemote;
  spec.endpoint = "http://embeddings.invalid/v1";
  spec.model_name = "remote-test";
  return spec;
}

}  // namespace

TEST_CASE("stub embeddings are deterministic unit vectors of width 512") {
  const EmbeddingVector a = stub_embedding(Modality::kText, "مرحبا");
  const EmbeddingVector b = stub_embedding(Modality::kText, "مرحبا");
  CHECK(a.size() == 512);
  CHECK(a == b);
  CHECK(a.values().norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(a == stub_embedding(Modality::kImage, "مرحبا"));
  CHECK_FALSE(a == stub_embedding(Modality::kText, "مرحبا!"));
  CHECK_FALSE(a == stub_embedding(Modality::kText, "مرحبا", 0.8, "hateful"));
}

TEST_CASE("embedding vectors enforce the shape contract") {
  CHECK_THROWS_AS(EmbeddingVector(Eigen::VectorXd::Zero(256)), ContractViolation);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(512);
  v[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(EmbeddingVector{v}, ContractViolation);
}

TEST_CASE("remote provider returning 256 values is a contract violation") {
  auto transport = std::make_shared<FakeTransport>(embedding_body(256));
  Embedder embedder(remote_spec(), nullptr, transport);
  CHECK_THROWS_AS(embedder.embed("text", Modality::kText), ContractViolation);
  CHECK(transport->calls == 1);

  auto bad_json = std::make_shared<FakeTransport>("not json");
  CHECK_THROWS_AS(Embedder(remote_spec(), nullptr, bad_json).embed("t", Modality::kText),
                  ContractViolation);
}

TEST_CASE("remote provider result is cached and reused") {
  testing::TempDir dir;
  auto transport = std::make_shared<FakeTransport>(embedding_body(512, 0.125));
  auto cache = std::make_shared<EmbeddingCache>(dir / "cache");
  Embedder embedder(remote_spec(), cache, transport);
  const EmbeddingVector first = embedder.embed("نص للاختبار", Modality::kText);
  const EmbeddingVector second = embedder.embed("نص للاختبار", Modality::kText);
  CHECK(first == second);
  CHECK(transport->calls == 1);
  CHECK(nlohmann::json::parse(transport->last_request).at("text") == "نص للاختبار");
}

TEST_CASE("cache round trip is bit-exact across restarts") {
  testing::TempDir dir;
  Eigen::VectorXd values(512);
  for (Eigen::Index i = 0; i < 512; ++i) values[i] = std::sin(0.37 * static_cast<double>(i)) / 3.0 + 1e-300;
  const EmbeddingVector v(values);
  const std::string key = EmbeddingCache::make_key(Modality::kText, "m", "hello");
  {
    EmbeddingCache cache(dir.path());
    cache.put(key, v, Modality::kText, "m");
  }
  EmbeddingCache reopened(dir.path());
  const auto hit = reopened.get(key);
  REQUIRE(hit.has_value());
  for (Eigen::Index i = 0; i < 512; ++i) CHECK((*hit)[i] == values[i]);
}

TEST_CASE("corrupted cache entry is dropped and treated as a miss") {
  testing::TempDir dir;
  EmbeddingCache cache(dir.path());
  const std::string key = EmbeddingCache::make_key(Modality::kText, "m", "x");
  cache.put(key, stub_embedding(Modality::kText, "x"), Modality::kText, "m");
  testing::write_file(dir / key, "{\"modality\":\"text\",\"model_name\":\"m\"}\n0.5\nnot-a-number\n");
  CHECK_FALSE(cache.get(key).has_value());
  CHECK_FALSE(std::filesystem::exists(dir / key));
  CHECK_FALSE(cache.get("absent").has_value());
}

TEST_CASE("cache keys separate modality, model and content") {
  std::set<std::string> keys;
  for (const auto modality : {Modality::kText, Modality::kImage}) {
    for (const char* model : {"a", "b", "ab"}) {
      for (const char* content : {"", "b", "x", "xy"}) {
        keys.insert(EmbeddingCache::make_key(modality, model, content));
      }
    }
  }
  CHECK(keys.size() == 24);
  CHECK(to_hex(sha256_parts({"ab", "c"})) != to_hex(sha256_parts({"a", "bc"})));
  CHECK(to_hex(sha256("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("cache is transparent to callers") {
  testing::TempDir dir;
  EmbeddingProviderSpec spec;
  spec.label_leak = 0.8;
  const Embedder cached(spec, std::make_shared<EmbeddingCache>(dir.path()));
  const Embedder uncached(spec);
  for (const char* text : {"أمل", "كراهية", "نص عادي"}) {
    for (const char* label : {"hope", "hate"}) {
      const auto once = cached.embed(text, Modality::kText, std::string(label));
      const auto twice = cached.embed(text, Modality::kText, std::string(label));
      const auto direct = uncached.embed(text, Modality::kText, std::string(label));
      CHECK(once == twice);
      CHECK(once == direct);
    }
  }
  // leak labels are part of the cache key, so the same text never collides
  CHECK_FALSE(cached.embed("أمل", Modality::kText, std::string("hope")) ==
              cached.embed("أمل", Modality::kText, std::string("hate")));
}

TEST_CASE("image embeddings read the referenced file") {
  testing::TempDir dir;
  testing::write_file(dir / "a.bin", "imagebytes");
  testing::write_file(dir / "b.bin", "imagebytes");
  const Embedder embedder(EmbeddingProviderSpec{}, nullptr, nullptr, dir.path());
  CHECK(embedder.embed("a.bin", Modality::kImage) == embedder.embed("b.bin", Modality::kImage));
  CHECK(embedder.embed("a.bin", Modality::kImage) == stub_embedding(Modality::kImage, "imagebytes"));
  CHECK_THROWS_AS(embedder.embed("missing.bin", Modality::kImage), InputError);
  CHECK_THROWS_AS(embedder.embed("", Modality::kText), InputError);
}

TEST_CASE("replay provider never computes") {
  testing::TempDir dir;
  EmbeddingProviderSpec spec;
  spec.kind = ProviderKind::kReplay;
  const Embedder embedder(spec, std::make_shared<EmbeddingCache>(dir.path()));
  CHECK_THROWS_AS(embedder.embed("x", Modality::kText), MissingFixtureError);
  CHECK_THROWS_AS(Embedder{spec}, ValidationError);
}

TEST_CASE("provider spec validation") {
  EmbeddingProviderSpec spec = remote_spec();
  spec.endpoint.clear();
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = EmbeddingProviderSpec{};
  spec.label_leak = -1.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("batch embedding preserves order") {
  const Embedder embedder(EmbeddingProviderSpec{});
  std::vector<EmbedRequest> requests;
  for (int i = 0; i < 40; ++i) requests.push_back({"text " + std::to_string(i), Modality::kText, std::nullopt});
  const auto out = embedder.embed_many(requests, 4);
  REQUIRE(out.size() == requests.size());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == stub_embedding(Modality::kText, requests[i].content));
}
