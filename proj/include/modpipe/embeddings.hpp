#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "modpipe/transport.hpp"

namespace modpipe {

inline constexpr Eigen::Index kEmbeddingDim = 512;

enum class Modality { kText, kImage };

std::string_view to_string(Modality modality);
std::optional<Modality> parse_modality(std::string_view text);

/// Fixed-length (512) vector of finite reals.
class EmbeddingVector {
 public:
  /// Throws ContractViolation on wrong length or non-finite entries.
  explicit EmbeddingVector(Eigen::VectorXd values);

  const Eigen::VectorXd& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

  bool operator==(const EmbeddingVector& other) const { return values_ == other.values_; }

 private:
  Eigen::VectorXd values_;
};

enum class ProviderKind { kRemote, kStub, kReplay };

std::string_view to_string(ProviderKind kind);
std::optional<ProviderKind> parse_provider_kind(std::string_view text);

struct EmbeddingProviderSpec {
  ProviderKind kind = ProviderKind::kStub;
  std::string endpoint;
  std::string model_name = "stub-embedding-v1";
  /// Name of the environment variable holding the API key (remote only).
  std::string api_key_env;
  /// Stub only: norm of the class-dependent offset added before
  /// normalization. Zero disables the leak.
  double label_leak = 0.0;

  /// Throws ValidationError if remote has no endpoint or values are invalid.
  void validate() const;
};

/// On-disk, content-addressed embedding store. One file per entry named by
/// hex digest: a JSON header line followed by 512 decimal values, one per line.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path directory);

  /// Digest of (modality, model_name, content bytes).
  static std::string make_key(Modality modality, std::string_view model_name,
                              std::string_view content);

  /// Corrupted entries are removed with a warning and reported as a miss.
  std::optional<EmbeddingVector> get(const std::string& key) const;
  void put(const std::string& key, const EmbeddingVector& vector, Modality modality,
           std::string_view model_name);

  const std::filesystem::path& directory() const noexcept { return directory_; }

 private:
  std::filesystem::path entry_path(const std::string& key) const;

  std::filesystem::path directory_;
  mutable std::shared_mutex mutex_;
};

/// Deterministic unit vector seeded from a digest of (modality, content).
/// With `leak_strength > 0` and a label, a fixed per-label direction scaled by
/// the strength is added before normalization.
EmbeddingVector stub_embedding(Modality modality, std::string_view content,
                               double leak_strength = 0.0,
                               const std::optional<std::string>& leak_label = std::nullopt);

struct EmbedRequest {
  /// Text, or an image reference (path) when modality is image.
  std::string content;
  Modality modality = Modality::kText;
  /// Gold label for the stub's label-leak mode; ignored by other providers.
  std::optional<std::string> leak_label;
};

/// Produces embeddings through a provider, consulting the cache first.
class Embedder {
 public:
  Embedder(EmbeddingProviderSpec spec, std::shared_ptr<EmbeddingCache> cache = nullptr,
           std::shared_ptr<Transport> transport = nullptr,
           std::filesystem::path image_root = {});

  EmbeddingVector embed(std::string_view content, Modality modality,
                        const std::optional<std::string>& leak_label = std::nullopt) const;
  EmbeddingVector embed(const EmbedRequest& request) const {
    return embed(request.content, request.modality, request.leak_label);
  }

  /// Embeds a batch with at most `max_in_flight` concurrent provider calls.
  std::vector<EmbeddingVector> embed_many(const std::vector<EmbedRequest>& requests,
                                          std::size_t max_in_flight = 4) const;

  void set_image_root(std::filesystem::path root) { image_root_ = std::move(root); }
  void set_retry_policy(RetryPolicy policy) { retry_ = policy; }
  const EmbeddingProviderSpec& spec() const noexcept { return spec_; }

  /// Resolves an image reference and returns the file bytes.
  /// Throws InputError when the file cannot be read.
  std::string read_image(std::string_view image_ref) const;

 private:
  std::string cache_model_name(const std::optional<std::string>& leak_label) const;
  EmbeddingVector compute(std::string_view content_bytes, std::string_view original,
                          Modality modality, const std::optional<std::string>& leak_label) const;

  EmbeddingProviderSpec spec_;
  std::shared_ptr<EmbeddingCache> cache_;
  std::shared_ptr<Transport> transport_;
  std::filesystem::path image_root_;
  RetryPolicy retry_;
};

}  // namespace modpipe
