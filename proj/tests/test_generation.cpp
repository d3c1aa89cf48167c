#include <doctest.h>

#include <random>

#include "test_util.hpp"
#include "worldgan/errors.hpp"
#include "worldgan/generation.hpp"

using namespace worldgan;

namespace {

const GeneratorStack& small_stack() {
  static const GeneratorStack stack = [] {
    std::mt19937_64 rng(2);
    const auto grid = testutil::random_grid({8, 6, 8}, 3, rng);
    const EmbeddingTable table(2, grid.palette(), {1, 0, -1, 0, 0, 1});
    TrainConfig c;
    c.steps_per_scale = 2;
    c.network.blocks = 3;
    c.network.base_channels = 4;
    c.seed = 1;
    return train(build_pyramid(encode_level(grid, table), {1.0, 0.5}), c, table);
  }();
  return stack;
}

// A slice of a ground-heavy ruin: grass on dirt, a stone-brick wall, air above.
LevelGrid ruins_fixture() {
  const Shape3 s{4, 5, 4};
  const std::vector<std::string> palette = {"air", "grass", "dirt", "stone_bricks", "cobblestone"};
  std::vector<TokenId> v(static_cast<std::size_t>(s.volume()));
  for (int d = 0; d < s.d; ++d)
    for (int h = 0; h < s.h; ++h)
      for (int w = 0; w < s.w; ++w) {
        TokenId t = 0;
        if (h == 0) t = 2;
        else if (h == 1) t = 1;
        else if (w == 0) t = h == 4 ? 4 : 3;
        v[(static_cast<std::size_t>(d) * s.h + h) * s.w + w] = t;
      }
  return LevelGrid(s, palette, v);
}

}  // namespace

TEST_CASE("sample shapes follow the size factors") {
  const auto& stack = small_stack();
  CHECK(sample(stack, {1, 1, 1}, 3).grid.shape() == stack.training_shape());
  const auto doubled = sample(stack, {2, 1, 1}, 3).grid.shape();
  CHECK(doubled == Shape3{16, 6, 8});
  const auto shapes = sample_shapes(stack, {2, 1, 1});
  CHECK(shapes.front() == Shape3{8, 3, 4});
  CHECK_THROWS_AS(sample_shapes(stack, {0.2, 1, 1}), ValidationError);
  CHECK_THROWS_AS(sample_shapes(stack, {-1, 1, 1}), ValidationError);
}

TEST_CASE("sampling is seeded") {
  const auto& stack = small_stack();
  CHECK(sample(stack, {1, 1, 1}, 11).grid == sample(stack, {1, 1, 1}, 11).grid);
  std::vector<LevelGrid> grids;
  for (std::uint64_t s = 0; s < 20; ++s) grids.push_back(sample(stack, {1, 1, 1}, s).grid);
  int distinct_pairs = 0;
  for (std::size_t i = 0; i + 1 < grids.size(); ++i) distinct_pairs += grids[i] == grids[i + 1] ? 0 : 1;
  CHECK(distinct_pairs == 19);
}

TEST_CASE("reconstruction noise reproduces reconstruct()") {
  const auto& stack = small_stack();
  std::vector<Field> noises;
  for (const auto& s : stack.scales) noises.push_back(s.recon_noise);
  CHECK(sample_with_noise(stack, noises).grid == reconstruct(stack).grid);
  CHECK(reconstruct(stack).field == reconstruct(stack).field);
  for (std::size_t j = 1; j < stack.scales.size(); ++j) {
    for (float v : stack.scales[j].recon_noise.storage()) CHECK(v == 0.0f);
  }
}

TEST_CASE("noise draws use the per-scale amplitude") {
  const auto& stack = small_stack();
  const auto shapes = sample_shapes(stack, {1, 1, 1});
  const auto a = draw_noise(stack, shapes, 4);
  const auto b = draw_noise(stack, shapes, 4);
  REQUIRE(a.size() == stack.scales.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    CHECK(a[j] == b[j]);
    CHECK(a[j].shape() == shapes[j]);
  }
}

TEST_CASE("style map on the ruins fixture") {
  const auto grid = ruins_fixture();
  const auto style = parse_style_map(R"({"grass": "sand", "dirt": "sand", "stone_bricks": "red_sandstone"})");
  const auto out = apply_style_map(grid, style);
  CHECK(out.palette() == std::vector<std::string>{"air", "sand", "red_sandstone", "cobblestone"});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& before = grid.palette()[grid.voxels()[i]];
    const auto& after = out.palette()[out.voxels()[i]];
    if (before == "grass" || before == "dirt") CHECK(after == "sand");
    else if (before == "stone_bricks") CHECK(after == "red_sandstone");
    else CHECK(after == before);
  }
  CHECK(apply_style_map(grid, StyleMap{}) == grid);
  // Targets are applied once: no chains.
  const auto swap = apply_style_map(grid, parse_style_map(R"({"grass": "dirt", "dirt": "grass"})"));
  CHECK(swap.palette()[1] == "dirt");
  CHECK(swap.palette()[2] == "grass");
}

TEST_CASE("style map parsing") {
  CHECK_THROWS_AS(parse_style_map("[1, 2]"), ParseError);
  CHECK_THROWS_AS(parse_style_map(R"({"a": 3})"), ParseError);
  CHECK_THROWS_AS(parse_style_map(R"({"a": ""})"), ValidationError);
  CHECK_THROWS_AS(parse_style_map("{"), ParseError);
  const auto dir = testutil::scratch_dir("style");
  CHECK_THROWS_AS(load_style_map(dir / "missing.json"), IoError);
}

TEST_CASE("editing commutes with sampling") {
  const auto& stack = small_stack();
  const auto style = parse_style_map(R"({"t0": "sand", "t2": "sand"})");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto plain = sample(stack, {1, 1, 1}, seed).grid;
    const auto edited = apply_style_map(plain, style);
    REQUIRE(edited.size() == plain.size());
    for (std::size_t i = 0; i < plain.size(); ++i) {
      const auto& name = plain.palette()[plain.voxels()[i]];
      const std::string expect = name == "t0" || name == "t2" ? "sand" : name;
      CHECK(edited.palette()[edited.voxels()[i]] == expect);
    }
  }
}
