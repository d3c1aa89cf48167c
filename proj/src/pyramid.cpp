#include "worldgan/pyramid.hpp"

#include <cmath>

#include "worldgan/block2vec.hpp"
#include "worldgan/errors.hpp"
#include "worldgan/kernels.hpp"

namespace worldgan {

std::vector<Shape3> compute_scale_shapes(Shape3 base, const std::vector<double>& factors) {
  if (factors.empty()) throw ValidationError("scale factor list is empty");
  if (factors.front() != 1.0) throw ValidationError("first scale factor must be 1.0");
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (!(factors[i] > 0.0 && factors[i] <= 1.0)) {
      throw ValidationError("scale factors must lie in (0, 1]");
    }
    if (i > 0 && !(factors[i] < factors[i - 1])) {
      throw ValidationError("scale factors must be strictly descending");
    }
  }
  std::vector<Shape3> shapes;
  shapes.reserve(factors.size());
  for (double f : factors) {
    Shape3 s;
    for (int axis = 0; axis < 3; ++axis) {
      s[axis] = std::max(1, static_cast<int>(std::round(f * base[axis])));
    }
    shapes.push_back(s);
  }
  return shapes;
}

Field resample_dense(const Field& field, Shape3 target) {
  if (target.d < 1 || target.h < 1 || target.w < 1) {
    throw ValidationError("resample target must be positive, got " + to_string(target));
  }
  if (target == field.shape()) return field;
  Field out(field.channels(), target);
  kernels::resample_trilinear(field.data(), field.shape(), out.data(), target, field.channels());
  return out;
}

Field downsample_dense(const Field& field, Shape3 target) {
  const auto& s = field.shape();
  if (target.d > s.d || target.h > s.h || target.w > s.w) {
    throw ValidationError("downsample target " + to_string(target) + " is larger than source " +
                          to_string(s));
  }
  return resample_dense(field, target);
}

Field upsample_dense(const Field& field, Shape3 target) {
  const auto& s = field.shape();
  if (target.d < s.d || target.h < s.h || target.w < s.w) {
    throw ValidationError("upsample target " + to_string(target) + " is smaller than source " +
                          to_string(s));
  }
  return resample_dense(field, target);
}

ScalePyramid build_pyramid(const Field& field, const std::vector<double>& factors) {
  ScalePyramid pyramid;
  pyramid.factors = factors;
  pyramid.shapes = compute_scale_shapes(field.shape(), factors);
  pyramid.fields.reserve(factors.size());
  for (const auto& shape : pyramid.shapes) {
    pyramid.fields.push_back(downsample_dense(field, shape));
  }
  return pyramid;
}

TokenHierarchy build_hierarchy(const TokenStats& stats) {
  TokenHierarchy h;
  h.rank.assign(stats.counts.size(), 0.0);
  for (std::size_t t = 0; t < stats.counts.size(); ++t) {
    if (stats.counts[t] > 0) {
      h.rank[t] = 1.0 / static_cast<double>(stats.counts[t]);
    } else {
      h.excluded.push_back(static_cast<TokenId>(t));
    }
  }
  return h;
}

LevelGrid downsample_hierarchical(const LevelGrid& grid, Shape3 target,
                                  const TokenHierarchy& hierarchy) {
  const auto& s = grid.shape();
  if (target.d > s.d || target.h > s.h || target.w > s.w) {
    throw ValidationError("downsample target " + to_string(target) + " is larger than source " +
                          to_string(s));
  }
  if (hierarchy.rank.size() != grid.token_count()) {
    throw ValidationError("hierarchy does not cover the grid palette");
  }
  const int k = static_cast<int>(grid.token_count());
  const auto one_hot = encode_level(grid, one_hot_table(grid.palette()));
  const auto weights = resample_dense(one_hot, target);
  const auto spatial = weights.spatial_size();
  std::vector<TokenId> voxels(spatial, 0);
  for (std::size_t v = 0; v < spatial; ++v) {
    double best = -1.0;
    for (int t = 0; t < k; ++t) {
      const double score =
          static_cast<double>(weights.channel(t)[v]) * hierarchy.rank[static_cast<std::size_t>(t)];
      if (score > best) {
        best = score;
        voxels[v] = static_cast<TokenId>(t);
      }
    }
  }
  return LevelGrid(target, grid.palette(), std::move(voxels));
}

ScalePyramid build_hierarchical_pyramid(const LevelGrid& grid, const std::vector<double>& factors,
                                        const TokenHierarchy& hierarchy) {
  return build_hierarchical_pyramid(grid, factors, hierarchy, one_hot_table(grid.palette()));
}

ScalePyramid build_hierarchical_pyramid(const LevelGrid& grid, const std::vector<double>& factors,
                                        const TokenHierarchy& hierarchy, const EmbeddingTable& table) {
  ScalePyramid pyramid;
  pyramid.factors = factors;
  pyramid.shapes = compute_scale_shapes(grid.shape(), factors);
  for (const auto& shape : pyramid.shapes) {
    pyramid.fields.push_back(encode_level(downsample_hierarchical(grid, shape, hierarchy), table));
  }
  return pyramid;
}

}  // namespace worldgan
