#include "worldgan/generation.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "worldgan/errors.hpp"

namespace worldgan {

using nlohmann::ordered_json;

std::vector<Shape3> sample_shapes(const GeneratorStack& stack, const SizeFactors& factors) {
  for (double f : factors) {
    if (!(f > 0.0) || !std::isfinite(f)) throw ValidationError("size factors must be positive");
  }
  std::vector<Shape3> shapes;
  const int footprint = stack.scales.front().generator.min_extent();
  for (const auto& scale : stack.scales) {
    Shape3 s;
    for (int axis = 0; axis < 3; ++axis) {
      s[axis] = std::max(1, static_cast<int>(std::round(scale.shape[axis] * factors[static_cast<std::size_t>(axis)])));
      if (s[axis] < footprint) {
        throw ValidationError("size factors give scale shape " + to_string(s) +
                              ", below the receptive footprint " + std::to_string(footprint));
      }
    }
    shapes.push_back(s);
  }
  return shapes;
}

std::vector<Field> draw_noise(const GeneratorStack& stack, const std::vector<Shape3>& shapes,
                              std::uint64_t seed) {
  if (shapes.size() != stack.scales.size()) {
    throw ValidationError("draw_noise: one shape per scale required");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<Field> noises;
  for (std::size_t j = 0; j < shapes.size(); ++j) {
    Field z(stack.channels, shapes[j]);
    const auto sigma = static_cast<float>(stack.scales[j].sigma);
    for (auto& v : z.storage()) v = sigma * normal(rng);
    noises.push_back(std::move(z));
  }
  return noises;
}

GeneratedSample sample_with_noise(const GeneratorStack& stack, const std::vector<Field>& noises) {
  if (noises.size() != stack.scales.size()) {
    throw ValidationError("sample: one noise field per scale required");
  }
  GeneratedSample out;
  out.field = run_cascade(stack.scales, noises);
  out.grid = decode_level(out.field, stack.embeddings);
  return out;
}

GeneratedSample sample(const GeneratorStack& stack, const SizeFactors& factors, std::uint64_t seed) {
  return sample_with_noise(stack, draw_noise(stack, sample_shapes(stack, factors), seed));
}

GeneratedSample reconstruct(const GeneratorStack& stack) {
  std::vector<Field> noises;
  for (const auto& scale : stack.scales) noises.push_back(scale.recon_noise);
  return sample_with_noise(stack, noises);
}

StyleMap parse_style_map(const std::string& text, const std::string& source) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError(source + ": style map must be an object of name pairs");
  StyleMap style;
  for (const auto& [from, to] : doc.items()) {
    if (!to.is_string()) throw ParseError(source + ": style map value for '" + from + "' must be a string");
    auto target = to.get<std::string>();
    if (from.empty() || target.empty()) throw ValidationError(source + ": style map names must be non-empty");
    style.mapping[from] = std::move(target);
  }
  return style;
}

StyleMap load_style_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_style_map(ss.str(), path.string());
}

LevelGrid apply_style_map(const LevelGrid& grid, const StyleMap& style) {
  std::vector<std::string> palette;
  std::unordered_map<std::string, TokenId> slot;
  std::vector<TokenId> remap(grid.token_count());
  for (std::size_t t = 0; t < grid.token_count(); ++t) {
    const auto& name = grid.palette()[t];
    auto it = style.mapping.find(name);
    const std::string& renamed = it == style.mapping.end() ? name : it->second;
    auto [pos, inserted] = slot.emplace(renamed, static_cast<TokenId>(palette.size()));
    if (inserted) palette.push_back(renamed);
    remap[t] = pos->second;
  }
  std::vector<TokenId> voxels(grid.size());
  for (std::size_t i = 0; i < voxels.size(); ++i) voxels[i] = remap[grid.voxels()[i]];
  return LevelGrid(grid.shape(), std::move(palette), std::move(voxels));
}

}  // namespace worldgan
