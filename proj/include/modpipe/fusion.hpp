#pragma once

#include <optional>
#include <string_view>

#include <Eigen/Core>

#include "modpipe/embeddings.hpp"

namespace modpipe {

/// How per-modality embeddings become one classifier input.
enum class FusionMode { kTextOnly, kImageOnly, kAverage, kConcatenate };

/// Flag spelling: text, image, avg, concat.
std::string_view to_string(FusionMode mode);
std::optional<FusionMode> parse_fusion_mode(std::string_view text);

bool needs_text(FusionMode mode);
bool needs_image(FusionMode mode);

/// Output width for 512-dim inputs: 1024 for concatenate, else 512.
Eigen::Index fused_dim(FusionMode mode);

/// text_only/image_only select one vector, average is element-wise
/// (t + v) / 2, concatenate stacks text then image.
/// Throws InputError when a required modality is missing.
Eigen::VectorXd fuse(const std::optional<EmbeddingVector>& text_vec,
                     const std::optional<EmbeddingVector>& image_vec, FusionMode mode);

/// Raw-vector form. Throws ContractViolation on a dimension mismatch.
Eigen::VectorXd fuse_values(const Eigen::VectorXd* text_vec, const Eigen::VectorXd* image_vec,
                            FusionMode mode);

}  // namespace modpipe
