#pragma once

#include <string>
#include <vector>

#include "worldgan/block2vec.hpp"
#include "worldgan/field.hpp"
#include "worldgan/level.hpp"

namespace worldgan {

inline const std::vector<double> kDefaultScaleFactors = {1.0, 0.75, 0.5, 0.25};

// Per-scale shapes round(factor * extent) (half away from zero) with a floor of 1. Throws
// ValidationError unless factors start at 1.0 and descend within (0, 1].
std::vector<Shape3> compute_scale_shapes(Shape3 base, const std::vector<double>& factors);

// Trilinear resampling, corner aligned; see kernels::resample_trilinear.
Field downsample_dense(const Field& field, Shape3 target);
Field upsample_dense(const Field& field, Shape3 target);
// No direction check.
Field resample_dense(const Field& field, Shape3 target);

// Scale 0 is full resolution, the last entry the coarsest.
struct ScalePyramid {
  std::vector<double> factors;
  std::vector<Shape3> shapes;
  std::vector<Field> fields;

  [[nodiscard]] std::size_t scale_count() const { return fields.size(); }
  [[nodiscard]] int channels() const { return fields.empty() ? 0 : fields.front().channels(); }
};

ScalePyramid build_pyramid(const Field& field, const std::vector<double>& factors);

// Importance score per token: 1 / count. Tokens with zero count get no rank and are listed in
// `excluded`.
struct TokenHierarchy {
  std::vector<double> rank;       // 0 for excluded tokens
  std::vector<TokenId> excluded;
  [[nodiscard]] bool has_rank(TokenId t) const { return rank.at(t) > 0.0; }
};

TokenHierarchy build_hierarchy(const TokenStats& stats);

// One-hot encode, resample every token channel trilinearly, then pick argmax of
// weight * rank per voxel (ties to the lower index).
LevelGrid downsample_hierarchical(const LevelGrid& grid, Shape3 target, const TokenHierarchy& hierarchy);

// Baseline pyramid: each scale is the one-hot encoding of the hierarchically downsampled grid.
ScalePyramid build_hierarchical_pyramid(const LevelGrid& grid, const std::vector<double>& factors,
                                        const TokenHierarchy& hierarchy);
// Same downsampling, each scale encoded with `table` instead.
ScalePyramid build_hierarchical_pyramid(const LevelGrid& grid, const std::vector<double>& factors,
                                        const TokenHierarchy& hierarchy, const EmbeddingTable& table);

}  // namespace worldgan
