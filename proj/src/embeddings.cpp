#include "modpipe/embeddings.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "modpipe/digest.hpp"
#include "modpipe/error.hpp"
#include "modpipe/log.hpp"
#include "modpipe/parallel.hpp"
#include "modpipe/random.hpp"

namespace modpipe {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Modality modality) {
  return modality == Modality::kText ? "text" : "image";
}

std::optional<Modality> parse_modality(std::string_view text) {
  if (text == "text") return Modality::kText;
  if (text == "image") return Modality::kImage;
  return std::nullopt;
}

std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::kRemote: return "remote";
    case ProviderKind::kStub: return "stub";
    case ProviderKind::kReplay: return "replay";
  }
  return "?";
}

std::optional<ProviderKind> parse_provider_kind(std::string_view text) {
  if (text == "remote") return ProviderKind::kRemote;
  if (text == "stub") return ProviderKind::kStub;
  if (text == "replay") return ProviderKind::kReplay;
  return std::nullopt;
}

EmbeddingVector::EmbeddingVector(Eigen::VectorXd values) : values_(std::move(values)) {
  if (values_.size() != kEmbeddingDim) {
    throw ContractViolation("embedding has " + std::to_string(values_.size()) +
                            " dimensions, expected " + std::to_string(kEmbeddingDim));
  }
  if (!values_.allFinite()) throw ContractViolation("embedding contains non-finite values");
}

void EmbeddingProviderSpec::validate() const {
  if (kind == ProviderKind::kRemote && endpoint.empty()) {
    throw ValidationError("remote embedding provider requires an endpoint");
  }
  if (model_name.empty()) throw ValidationError("embedding provider requires a model name");
  if (!(label_leak >= 0.0) || !std::isfinite(label_leak)) {
    throw ValidationError("label_leak must be a finite non-negative number");
  }
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

EmbeddingCache::EmbeddingCache(fs::path directory) : directory_(std::move(directory)) {
  fs::create_directories(directory_);
}

std::string EmbeddingCache::make_key(Modality modality, std::string_view model_name,
                                     std::string_view content) {
  return to_hex(sha256_parts({to_string(modality), model_name, content}));
}

fs::path EmbeddingCache::entry_path(const std::string& key) const { return directory_ / key; }

std::optional<EmbeddingVector> EmbeddingCache::get(const std::string& key) const {
  const fs::path path = entry_path(key);
  std::string problem;
  {
    std::shared_lock lock(mutex_);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string header_line;
    std::getline(in, header_line);
    try {
      const json header = json::parse(header_line);
      if (!header.is_object() || !header.contains("modality") || !header.contains("model_name")) {
        throw std::runtime_error("incomplete header");
      }
      Eigen::VectorXd values(kEmbeddingDim);
      std::string line;
      Eigen::Index n = 0;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (n >= kEmbeddingDim) throw std::runtime_error("too many values");
        char* end = nullptr;
        values[n] = std::strtod(line.c_str(), &end);
        if (end == line.c_str() || *end != '\0') throw std::runtime_error("bad value '" + line + "'");
        ++n;
      }
      if (n != kEmbeddingDim) throw std::runtime_error("expected 512 values, found " + std::to_string(n));
      return EmbeddingVector(std::move(values));
    } catch (const std::exception& e) {
      problem = e.what();
    }
  }
  std::unique_lock lock(mutex_);
  std::error_code ec;
  fs::remove(path, ec);
  log_warning("dropping corrupted embedding cache entry " + key + ": " + problem);
  return std::nullopt;
}

void EmbeddingCache::put(const std::string& key, const EmbeddingVector& vector, Modality modality,
                         std::string_view model_name) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);

  ordered_json header;
  header["modality"] = std::string(to_string(modality));
  header["model_name"] = std::string(model_name);
  header["created_at"] = stamp;

  std::ostringstream body;
  body << header.dump() << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < vector.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\n", vector[i]);
    body << buf;
  }

  std::unique_lock lock(mutex_);
  const fs::path final_path = entry_path(key);
  fs::path tmp = final_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write embedding cache entry " + tmp.string());
    out << body.str();
  }
  fs::rename(tmp, final_path);
}

// ---------------------------------------------------------------------------
// Stub provider
// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd seeded_unit_vector(std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(kEmbeddingDim);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return v / v.norm();
}

}  // namespace

EmbeddingVector stub_embedding(Modality modality, std::string_view content, double leak_strength,
                               const std::optional<std::string>& leak_label) {
  Eigen::VectorXd v =
      seeded_unit_vector(digest_seed(sha256_parts({"stub", to_string(modality), content})));
  if (leak_strength > 0.0 && leak_label) {
    v += leak_strength * seeded_unit_vector(digest_seed(
                             sha256_parts({"leak-direction", to_string(modality), *leak_label})));
    v /= v.norm();
  }
  return EmbeddingVector(std::move(v));
}

// ---------------------------------------------------------------------------
// Embedder
// ---------------------------------------------------------------------------

Embedder::Embedder(EmbeddingProviderSpec spec, std::shared_ptr<EmbeddingCache> cache,
                   std::shared_ptr<Transport> transport, fs::path image_root)
    : spec_(std::move(spec)),
      cache_(std::move(cache)),
      transport_(std::move(transport)),
      image_root_(std::move(image_root)) {
  spec_.validate();
  if (spec_.kind == ProviderKind::kRemote && !transport_) {
    transport_ = std::make_shared<HttpTransport>();
  }
  if (spec_.kind == ProviderKind::kReplay && !cache_) {
    throw ValidationError("replay embedding provider requires a cache directory");
  }
}

std::string Embedder::read_image(std::string_view image_ref) const {
  fs::path path(image_ref);
  if (path.is_relative() && !image_root_.empty()) path = image_root_ / path;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot resolve image '" + std::string(image_ref) + "'");
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return bytes.str();
}

std::string Embedder::cache_model_name(const std::optional<std::string>& leak_label) const {
  if (spec_.kind != ProviderKind::kStub || spec_.label_leak <= 0.0 || !leak_label) {
    return spec_.model_name;
  }
  char strength[40];
  std::snprintf(strength, sizeof strength, "%.17g", spec_.label_leak);
  return spec_.model_name + "|leak=" + strength + ":" + *leak_label;
}

EmbeddingVector Embedder::compute(std::string_view content_bytes, std::string_view original,
                                  Modality modality,
                                  const std::optional<std::string>& leak_label) const {
  switch (spec_.kind) {
    case ProviderKind::kStub:
      return stub_embedding(modality, content_bytes, spec_.label_leak, leak_label);
    case ProviderKind::kReplay:
      throw MissingFixtureError("no cached " + std::string(to_string(modality)) +
                                " embedding for '" + std::string(original.substr(0, 60)) + "'");
    case ProviderKind::kRemote: {
      ordered_json request;
      request["model"] = spec_.model_name;
      request["modality"] = std::string(to_string(modality));
      if (modality == Modality::kText) {
        request["text"] = std::string(content_bytes);
      } else {
        request["image_base64"] = base64_encode(content_bytes);
      }
      Headers headers;
      if (auto key = credential_from_env(spec_.api_key_env); !key.empty()) {
        headers.emplace_back("Authorization", "Bearer " + key);
      }
      const HttpResponse response =
          post_with_retries(*transport_, spec_.endpoint, request.dump(), headers, retry_);
      json body;
      try {
        body = json::parse(response.body);
      } catch (const json::parse_error&) {
        throw ContractViolation("embedding provider returned a non-JSON body");
      }
      if (!body.is_object() || !body.contains("embedding") || !body["embedding"].is_array()) {
        throw ContractViolation("embedding provider response lacks an 'embedding' array");
      }
      const json& values = body["embedding"];
      if (static_cast<Eigen::Index>(values.size()) != kEmbeddingDim) {
        throw ContractViolation("embedding provider returned " + std::to_string(values.size()) +
                                " values, expected " + std::to_string(kEmbeddingDim));
      }
      Eigen::VectorXd v(kEmbeddingDim);
      for (Eigen::Index i = 0; i < kEmbeddingDim; ++i) {
        if (!values[static_cast<std::size_t>(i)].is_number()) {
          throw ContractViolation("embedding provider returned a non-numeric value");
        }
        v[i] = values[static_cast<std::size_t>(i)].get<double>();
      }
      return EmbeddingVector(std::move(v));
    }
  }
  throw std::logic_error("unhandled provider kind");
}

EmbeddingVector Embedder::embed(std::string_view content, Modality modality,
                                const std::optional<std::string>& leak_label) const {
  if (content.empty()) throw InputError("cannot embed empty content");
  std::string image_bytes;
  std::string_view bytes = content;
  if (modality == Modality::kImage) {
    image_bytes = read_image(content);
    bytes = image_bytes;
  }
  const std::string model_name = cache_model_name(leak_label);
  std::string key;
  if (cache_) {
    key = EmbeddingCache::make_key(modality, model_name, bytes);
    if (auto hit = cache_->get(key)) return *std::move(hit);
  }
  EmbeddingVector v = compute(bytes, content, modality, leak_label);
  if (cache_) cache_->put(key, v, modality, model_name);
  return v;
}

std::vector<EmbeddingVector> Embedder::embed_many(const std::vector<EmbedRequest>& requests,
                                                  std::size_t max_in_flight) const {
  std::vector<std::optional<EmbeddingVector>> slots(requests.size());
  parallel_for(requests.size(), max_in_flight,
               [&](std::size_t i) { slots[i] = embed(requests[i]); });
  std::vector<EmbeddingVector> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(*std::move(s));
  return out;
}

}  // namespace modpipe
