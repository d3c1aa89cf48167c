#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "worldgan/gan.hpp"

namespace worldgan {

struct GeneratedSample {
  Field field;
  LevelGrid grid;
};

using SizeFactors = std::array<double, 3>;  // depth, height, width

// Per-scale noise shapes (coarsest first) for a sample scaled by `factors` relative to the
// training snippet. Throws ValidationError if any scale falls below the receptive footprint.
std::vector<Shape3> sample_shapes(const GeneratorStack& stack, const SizeFactors& factors);

// Fresh z_n ~ N(0, sigma_n^2) per scale, coarsest first, drawn in that order from `seed`.
std::vector<Field> draw_noise(const GeneratorStack& stack, const std::vector<Shape3>& shapes,
                              std::uint64_t seed);

GeneratedSample sample_with_noise(const GeneratorStack& stack, const std::vector<Field>& noises);
GeneratedSample sample(const GeneratorStack& stack, const SizeFactors& factors, std::uint64_t seed);
// Fixed reconstruction noise at the coarsest scale, zero noise below.
GeneratedSample reconstruct(const GeneratorStack& stack);

// Partial rename of palette entries, applied after decoding.
struct StyleMap {
  std::map<std::string, std::string> mapping;
};

StyleMap parse_style_map(const std::string& text, const std::string& source = "<memory>");
StyleMap load_style_map(const std::filesystem::path& path);

// Renames palette entries through the map in a single pass, merges entries that end up with the
// same name (first occurrence keeps its slot) and remaps voxel indices accordingly.
LevelGrid apply_style_map(const LevelGrid& grid, const StyleMap& style);

}  // namespace worldgan
