#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_util.hpp"
#include "worldgan/block2vec.hpp"
#include "worldgan/errors.hpp"

using namespace worldgan;

namespace {

// X and Y share the context {A}; Z only ever touches B.
LevelGrid shared_context_snippet() {
  const Shape3 s{6, 6, 10};
  const std::vector<std::string> palette = {"A", "X", "Y", "B", "Z"};
  std::vector<TokenId> v(static_cast<std::size_t>(s.volume()));
  for (int d = 0; d < s.d; ++d)
    for (int h = 0; h < s.h; ++h)
      for (int w = 0; w < s.w; ++w) {
        const bool even = (d + h + w) % 2 == 0;
        TokenId t;
        if (w < 5) t = even && w <= 3 ? (d % 2 == 0 ? 1 : 2) : 0;
        else t = even && w >= 6 ? 4 : 3;
        v[(static_cast<std::size_t>(d) * s.h + h) * s.w + w] = t;
      }
  return LevelGrid(s, palette, v);
}

std::vector<ContextPair> sorted(std::vector<ContextPair> p) {
  std::sort(p.begin(), p.end(), [](auto a, auto b) {
    return std::pair(a.target, a.context) < std::pair(b.target, b.context);
  });
  return p;
}

}  // namespace

TEST_CASE("keep probability") {
  CHECK(keep_probability(0.001) == 1.0);
  CHECK(keep_probability(1.0) == doctest::Approx(std::sqrt(1001.0) * 0.001).epsilon(1e-12));
  CHECK(keep_probability(1.0) == doctest::Approx(0.031639).epsilon(1e-4));
  CHECK(keep_probability(0.25) == doctest::Approx(0.063372).epsilon(1e-4));
  CHECK_THROWS_AS(keep_probability(0.0), std::domain_error);
  CHECK_THROWS_AS(keep_probability(-0.1), std::domain_error);
  double prev = 1.0;
  for (double f = 1e-4; f <= 1.0; f *= 1.2) {
    CHECK(keep_probability(f) <= prev);
    prev = keep_probability(f);
  }
}

TEST_CASE("context dataset") {
  const LevelGrid aba({1, 1, 3}, {"A", "B"}, {0, 1, 0});
  const auto pairs = build_context_dataset(aba, Neighborhood::axis6, token_stats(aba), 1, false);
  CHECK(sorted(pairs) == sorted({{0, 1}, {1, 0}, {1, 0}, {0, 1}}));

  const auto uniform = LevelGrid::filled({3, 2, 2}, {"A", "B"});
  for (const auto& p : build_context_dataset(uniform, Neighborhood::axis6, token_stats(uniform), 1, false)) {
    CHECK(p == ContextPair{0, 0});
  }

  std::mt19937_64 rng(1);
  const auto g = testutil::random_grid({6, 6, 6}, 3, rng);
  const auto a = build_context_dataset(g, Neighborhood::axis6, token_stats(g), 42);
  const auto b = build_context_dataset(g, Neighborhood::axis6, token_stats(g), 42);
  CHECK(a == b);
  // Interior voxels have 6 neighbors: full count without subsampling.
  const auto full = build_context_dataset(g, Neighborhood::axis6, token_stats(g), 42, false);
  CHECK(full.size() == 3 * 2 * 5 * 36);
  CHECK(a.size() < full.size());
  CHECK(parse_neighborhood("axis6") == Neighborhood::axis6);
  CHECK_THROWS_AS(parse_neighborhood("moore26"), ValidationError);
}

TEST_CASE("skip-gram gradient matches central differences") {
  const int k = 4, m = 3;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto model = SkipGramModel::initialize(k, m, 3);
  for (auto& v : model.input_weights) v = dist(rng);
  for (auto& v : model.output_weights) v = dist(rng);
  const double h = 1e-4;
  for (TokenId t = 0; t < k; ++t) {
    for (TokenId c = 0; c < k; ++c) {
      const ContextPair pair{t, c};
      const auto g = skipgram_gradient(model, pair);
      auto check = [&](std::vector<double>& weights, const std::vector<double>& analytic) {
        for (std::size_t i = 0; i < weights.size(); ++i) {
          const double saved = weights[i];
          weights[i] = saved + h;
          const double lp = skipgram_loss(model, pair);
          weights[i] = saved - h;
          const double lm = skipgram_loss(model, pair);
          weights[i] = saved;
          const double fd = (lp - lm) / (2 * h);
          const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
          CHECK(std::abs(fd - analytic[i]) / denom <= 1e-3);
        }
      };
      check(model.input_weights, g.input_weights);
      check(model.output_weights, g.output_weights);
    }
  }
}

TEST_CASE("training: shapes, determinism, errors") {
  std::mt19937_64 rng(8);
  const auto g = testutil::random_grid({5, 5, 5}, 5, rng);
  const auto pairs = build_context_dataset(g, Neighborhood::axis6, token_stats(g), 1, false);
  const auto a = train_embeddings(pairs, g.palette(), 32, 3, 0.025, 9);
  CHECK(a.table.token_count() == 5);
  CHECK(a.table.dimension() == 32);
  for (double v : a.table.vectors()) CHECK(std::isfinite(v));
  CHECK(a.epoch_losses.size() == 3);
  const auto b = train_embeddings(pairs, g.palette(), 32, 3, 0.025, 9);
  CHECK(a.table == b.table);

  CHECK_THROWS_AS(train_embeddings({}, g.palette(), 4, 1, 0.1, 1), ValidationError);
  CHECK_THROWS_AS(train_embeddings(pairs, {"only"}, 4, 1, 0.1, 1), ValidationError);
}

TEST_CASE("shared contexts give closer embeddings") {
  const auto g = shared_context_snippet();
  const auto pairs = build_context_dataset(g, Neighborhood::axis6, token_stats(g), 1, false);
  const auto t = train_embeddings(pairs, g.palette(), 32, 30, 0.025, 4).table;
  const double xy = cosine_similarity(t.row(1), t.row(2));
  CHECK(xy > cosine_similarity(t.row(1), t.row(4)));
  CHECK(xy > cosine_similarity(t.row(2), t.row(4)));
}

TEST_CASE("codec") {
  const EmbeddingTable t(2, {"a", "b", "c"}, {0, 0, 1, 0, 0, 1});
  const LevelGrid one({1, 1, 1}, {"b"}, {0});
  const auto f = encode_level(one, t);
  CHECK(f.channels() == 2);
  CHECK(f.at(0, 0, 0, 0) == 1.0f);
  CHECK(f.at(1, 0, 0, 0) == 0.0f);

  std::mt19937_64 rng(3);
  const auto g = testutil::random_grid({4, 3, 5}, 3, rng);
  const EmbeddingTable named(2, g.palette(), {0, 0, 1, 0, 0, 1});
  CHECK(decode_level(encode_level(g, named), named) == g);

  SUBCASE("columns of equal tokens are equal") {
    const LevelGrid two({1, 1, 2}, {"c"}, {0, 0});
    const auto e = encode_level(two, t);
    CHECK(e.at(0, 0, 0, 0) == e.at(0, 0, 0, 1));
    CHECK(e.at(1, 0, 0, 0) == e.at(1, 0, 0, 1));
  }
  SUBCASE("uniform field decodes to a uniform grid") {
    Field u(2, {2, 2, 2});
    for (std::size_t i = 0; i < 8; ++i) u.channel(1)[i] = 1.0f;
    const auto d = decode_level(u, t);
    for (auto v : d.voxels()) CHECK(v == 2);
  }
  SUBCASE("ties go to the lower index") {
    const EmbeddingTable dup(1, {"p", "q"}, {1, 1});
    Field u(1, {1, 1, 1}, 1.0f);
    CHECK(decode_level(u, dup).voxels()[0] == 0);
  }
  SUBCASE("unknown token is named") {
    const LevelGrid bad({1, 1, 1}, {"zzz"}, {0});
    try {
      (void)encode_level(bad, t);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("zzz") != std::string::npos);
    }
  }
}

TEST_CASE("embedding files") {
  std::string text = R"({"dimension": 768, "tokens": {)";
  for (const char* name : {"grass", "dirt", "stone"}) {
    if (text.back() != '{') text += ",";
    text += std::string("\"") + name + "\": [";
    for (int i = 0; i < 768; ++i) text += (i ? "," : "") + std::to_string(i * 0.001);
    text += "]";
  }
  text += "}}";
  const auto t = parse_embeddings(text);
  CHECK(t.dimension() == 768);
  CHECK(t.palette() == std::vector<std::string>{"grass", "dirt", "stone"});

  CHECK_THROWS_AS(parse_embeddings(R"({"dimension": 2, "tokens": {"a": [1, 2], "b": [1]}})"), ValidationError);
  CHECK_THROWS_AS(parse_embeddings(R"({"dimension": 2})"), ParseError);
  CHECK_THROWS_AS(parse_embeddings("nope"), ParseError);

  const auto dir = testutil::scratch_dir("embeddings");
  const EmbeddingTable small(3, {"a", "b"}, {0.1, -2.5, 1e-7, 3, 4, 5.123456789012345});
  save_embeddings(small, dir / "e.json", R"({"seed": 1})");
  CHECK(load_embeddings(dir / "e.json") == small);
}

TEST_CASE("cosine similarity") {
  const std::vector<double> a = {1, 0}, b = {0, 2}, c = {3, 0};
  CHECK(cosine_similarity(a, b) == 0.0);
  CHECK(cosine_similarity(a, c) == doctest::Approx(1.0));
}
