#include "modpipe/fusion.hpp"

#include "modpipe/error.hpp"

namespace modpipe {

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kTextOnly: return "text";
    case FusionMode::kImageOnly: return "image";
    case FusionMode::kAverage: return "avg";
    case FusionMode::kConcatenate: return "concat";
  }
  return "?";
}

std::optional<FusionMode> parse_fusion_mode(std::string_view text) {
  if (text == "text") return FusionMode::kTextOnly;
  if (text == "image") return FusionMode::kImageOnly;
  if (text == "avg") return FusionMode::kAverage;
  if (text == "concat") return FusionMode::kConcatenate;
  return std::nullopt;
}

bool needs_text(FusionMode mode) { return mode != FusionMode::kImageOnly; }
bool needs_image(FusionMode mode) { return mode != FusionMode::kTextOnly; }

Eigen::Index fused_dim(FusionMode mode) {
  return mode == FusionMode::kConcatenate ? 2 * kEmbeddingDim : kEmbeddingDim;
}

Eigen::VectorXd fuse_values(const Eigen::VectorXd* text_vec, const Eigen::VectorXd* image_vec,
                            FusionMode mode) {
  if (needs_text(mode) && text_vec == nullptr) {
    throw InputError("fusion mode '" + std::string(to_string(mode)) + "' requires a text vector");
  }
  if (needs_image(mode) && image_vec == nullptr) {
    throw InputError("fusion mode '" + std::string(to_string(mode)) +
                     "' requires an image vector");
  }
  switch (mode) {
    case FusionMode::kTextOnly: return *text_vec;
    case FusionMode::kImageOnly: return *image_vec;
    case FusionMode::kAverage:
      if (text_vec->size() != image_vec->size()) {
        throw ContractViolation("average fusion needs equal dimensions, got " +
                                std::to_string(text_vec->size()) + " and " +
                                std::to_string(image_vec->size()));
      }
      return (*text_vec + *image_vec) / 2.0;
    case FusionMode::kConcatenate: {
      Eigen::VectorXd out(text_vec->size() + image_vec->size());
      out << *text_vec, *image_vec;
      return out;
    }
  }
  throw std::logic_error("unhandled fusion mode");
}

Eigen::VectorXd fuse(const std::optional<EmbeddingVector>& text_vec,
                     const std::optional<EmbeddingVector>& image_vec, FusionMode mode) {
  return fuse_values(text_vec ? &text_vec->values() : nullptr,
                     image_vec ? &image_vec->values() : nullptr, mode);
}

}  // namespace modpipe
