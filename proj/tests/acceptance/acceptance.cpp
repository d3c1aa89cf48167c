// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "worldgan/cli.hpp"
#include "worldgan/evaluation.hpp"
#include "worldgan/generation.hpp"

using namespace worldgan;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Check {
  Outcome& out;
  void operator()(bool ok, const std::string& what) {
    if (!ok) {
      out.pass = false;
      if (!out.detail.empty()) out.detail += "; ";
      out.detail += what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

LevelGrid random_grid(Shape3 s, int k, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, k - 1);
  std::vector<std::string> palette;
  for (int i = 0; i < k; ++i) palette.push_back("t" + std::to_string(i));
  std::vector<TokenId> v(static_cast<std::size_t>(s.volume()));
  for (auto& t : v) t = static_cast<TokenId>(pick(rng));
  return LevelGrid(s, palette, v);
}

int run_cli(std::vector<std::string> args) {
  std::ostringstream sink;
  auto* old = std::cerr.rdbuf(sink.rdbuf());
  const int code = cli::run(args);
  std::cerr.rdbuf(old);
  if (code != 0) std::cerr << sink.str();
  return code;
}

// ---------------------------------------------------------------------------------------------
// A1: TPKL-Div against a direct-summation oracle keyed by pattern strings.

double oracle_tpkl(const LevelGrid& p_grid, const LevelGrid& q_grid, const std::vector<int>& sizes, double eps) {
  auto key = [](const LevelGrid& g, int d, int h, int w, int n) {
    std::string k;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) k += g.palette()[g.at(d + a, h + b, w + c)] + "|";
    return k;
  };
  auto freqs = [&](const LevelGrid& g, int n) {
    std::map<std::string, double> f;
    double total = 0;
    for (int d = 0; d + n <= g.shape().d; ++d)
      for (int h = 0; h + n <= g.shape().h; ++h)
        for (int w = 0; w + n <= g.shape().w; ++w) {
          f[key(g, d, h, w, n)] += 1.0;
          total += 1.0;
        }
    for (auto& [_, v] : f) v /= total;
    return f;
  };
  double sum = 0.0;
  for (int n : sizes) {
    const auto p = freqs(p_grid, n), q = freqs(q_grid, n);
    std::map<std::string, std::pair<double, double>> u;
    for (const auto& [s, v] : p) u[s].first = v;
    for (const auto& [s, v] : q) u[s].second = v;
    const double z = 1.0 + eps * static_cast<double>(u.size());
    double kl = 0.0;
    for (const auto& [s, pq] : u) {
      const double ps = (pq.first + eps) / z, qs = (pq.second + eps) / z;
      kl += ps * std::log(ps / qs);
    }
    sum += kl;
  }
  return sum / static_cast<double>(sizes.size());
}

Outcome a1() {
  Outcome out;
  Check check{out};
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int instances = 0;
  auto compare = [&](const LevelGrid& a, const LevelGrid& b, const std::vector<int>& sizes) {
    const double got = tpkl_div(a, b, sizes, 1e-5);
    const double want = oracle_tpkl(a, b, sizes, 1e-5);
    worst = std::max(worst, std::abs(got - want));
    ++instances;
    if (tpkl_div(a, a, sizes, 1e-5) != 0.0 || tpkl_div(b, b, sizes, 1e-5) != 0.0) {
      check(false, "tpkl_div(g,g) != 0");
    }
  };
  // Exhaustive: every pair of binary 1x2x2 grids at n = 1, and every binary 2x2x2 grid against
  // a fixed partner set at n = 1 and 2.
  auto bits = [](int x, int count) {
    std::vector<TokenId> v;
    for (int b = 0; b < count; ++b) v.push_back(static_cast<TokenId>((x >> b) & 1));
    return v;
  };
  for (int x = 0; x < 16; ++x)
    for (int y = 0; y < 16; ++y) {
      compare(LevelGrid({1, 2, 2}, {"t0", "t1"}, bits(x, 4)), LevelGrid({1, 2, 2}, {"t0", "t1"}, bits(y, 4)), {1});
    }
  for (int x = 0; x < 256; ++x)
    for (int y : {0, 1, 37, 90, 170, 255}) {
      compare(LevelGrid({2, 2, 2}, {"t0", "t1"}, bits(x, 8)), LevelGrid({2, 2, 2}, {"t0", "t1"}, bits(y, 8)), {1, 2});
    }
  // Random instances up to 3x3x3 with k <= 3.
  std::uniform_int_distribution<int> ext(1, 3), kk(1, 3);
  for (int i = 0; i < 300; ++i) {
    const Shape3 sa{ext(rng), ext(rng), ext(rng)}, sb{ext(rng), ext(rng), ext(rng)};
    const int k = kk(rng);
    const auto a = random_grid(sa, k, rng), b = random_grid(sb, k, rng);
    const int nmax = std::min({sa.d, sa.h, sa.w, sb.d, sb.h, sb.w});
    std::vector<int> sizes;
    for (int n = 1; n <= nmax; ++n) sizes.push_back(n);
    compare(a, b, sizes);
  }
  check(worst <= 1e-9, "max |tpkl - oracle| = " + fmt("%.3g", worst));
  out.detail = std::to_string(instances) + " instances, max err " + fmt("%.2g", worst) +
               (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// ---------------------------------------------------------------------------------------------
// A2: Levenshtein against the full-matrix dynamic program.

std::int64_t oracle_levenshtein(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
  std::vector<std::vector<std::int64_t>> t(a.size() + 1, std::vector<std::int64_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) t[i][0] = static_cast<std::int64_t>(i);
  for (std::size_t j = 0; j <= b.size(); ++j) t[0][j] = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      t[i][j] = std::min({t[i - 1][j] + 1, t[i][j - 1] + 1, t[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return t[a.size()][b.size()];
}

Outcome a2() {
  Outcome out;
  Check check{out};
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> len(0, 64), alpha(1, 4);
  auto random_seq = [&](int alphabet) {
    std::uniform_int_distribution<int> sym(0, alphabet - 1);
    std::vector<TokenId> s(static_cast<std::size_t>(len(rng)));
    for (auto& t : s) t = static_cast<TokenId>(sym(rng));
    return s;
  };
  const std::string k = "kitten", s = "sitting";
  check(levenshtein(std::vector<TokenId>(k.begin(), k.end()), std::vector<TokenId>(s.begin(), s.end())) == 3,
        "kitten/sitting != 3");
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const int a = alpha(rng);
    const auto x = random_seq(a), y = random_seq(a);
    const auto d = levenshtein(x, y);
    if (d != oracle_levenshtein(x, y) || d != levenshtein(y, x)) ++mismatches;
  }
  check(mismatches == 0, std::to_string(mismatches) + " oracle mismatches");
  int violations = 0;
  for (int i = 0; i < 200; ++i) {
    const int a = alpha(rng);
    const auto x = random_seq(a), y = random_seq(a), z = random_seq(a);
    if (levenshtein(x, z) > levenshtein(x, y) + levenshtein(y, z)) ++violations;
  }
  check(violations == 0, std::to_string(violations) + " triangle violations");
  if (out.pass) out.detail = "1000 pairs, 200 triples";
  return out;
}

// ---------------------------------------------------------------------------------------------
// A3: paper figures.

Outcome a3() {
  Outcome out;
  Check check{out};
  auto mb = [](std::vector<std::int64_t> s, std::int64_t c) { return memory_footprint(s, c).megabytes; };
  check(std::abs(mb({202, 16}, 12) - 0.16) <= 0.01, "0.16 MB");
  check(std::abs(mb({121, 136, 33}, 71) - 154.23) <= 0.01, "154.23 MB");
  check(std::abs(mb({121, 136, 33}, 32) - 69.51) <= 0.01, "69.51 MB");
  check(memory_footprint({121, 136, 33}, 71).values == 38556408, "38,556,408 values");
  const std::vector<std::pair<BoundingBox, std::int64_t>> table = {
      {{{-3219, -3132}, {2628, 2717}, {116, 128}}, 92916},
      {{{1082, 1167}, {1110, 1186}, {65, 103}}, 245480},
      {{{1026, 1077}, {1088, 1152}, {63, 73}}, 32640},
      {{{606, 695}, {-688, -629}, {39, 64}}, 131275},
      {{{-2753, -2702}, {3242, 3296}, {56, 86}}, 82620},
      {{{24987, 25029}, {-799, -754}, {20, 38}}, 34020},
      {{{25165, 25286}, {-770, -634}, {55, 88}}, 543048}};
  for (const auto& [box, volume] : table) {
    check(bbox_volume(box) == volume, "volume " + std::to_string(volume));
  }
  if (out.pass) out.detail = "3 memory figures, 7 volumes";
  return out;
}

// ---------------------------------------------------------------------------------------------
// A4: block2vec.

LevelGrid shared_context_snippet() {
  const Shape3 s{6, 6, 10};
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
  return LevelGrid(s, {"A", "X", "Y", "B", "Z"}, v);
}

Outcome a4() {
  Outcome out;
  Check check{out};
  // Hand-evaluated: f=0.001 -> sqrt(2) clamps to 1; f=0.25 -> sqrt(251)*0.004; f=1 -> sqrt(1001)*0.001.
  check(std::abs(keep_probability(0.001) - 1.0) <= 1e-6, "keep(0.001)");
  check(std::abs(keep_probability(0.25) - 0.0633719181) <= 1e-6, "keep(0.25)");
  check(std::abs(keep_probability(1.0) - 0.0316385840) <= 1e-6, "keep(1.0)");

  std::mt19937_64 rng(404);
  std::normal_distribution<double> dist;
  auto model = SkipGramModel::initialize(4, 3, 1);
  for (auto& v : model.input_weights) v = dist(rng);
  for (auto& v : model.output_weights) v = dist(rng);
  double worst = 0.0;
  for (TokenId t = 0; t < 4; ++t)
    for (TokenId c = 0; c < 4; ++c) {
      const ContextPair pair{t, c};
      const auto g = skipgram_gradient(model, pair);
      auto scan = [&](std::vector<double>& w, const std::vector<double>& an) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double saved = w[i];
          w[i] = saved + 1e-4;
          const double lp = skipgram_loss(model, pair);
          w[i] = saved - 1e-4;
          const double lm = skipgram_loss(model, pair);
          w[i] = saved;
          const double fd = (lp - lm) / 2e-4;
          worst = std::max(worst, std::abs(fd - an[i]) / std::max({std::abs(fd), std::abs(an[i]), 1e-6}));
        }
      };
      scan(model.input_weights, g.input_weights);
      scan(model.output_weights, g.output_weights);
    }
  check(worst <= 1e-3, "gradient rel err " + fmt("%.3g", worst));

  const auto grid = shared_context_snippet();
  const auto pairs = build_context_dataset(grid, Neighborhood::axis6, token_stats(grid), 1, false);
  const auto table = train_embeddings(pairs, grid.palette(), 32, 30, 0.025, 4).table;
  const double xy = cosine_similarity(table.row(1), table.row(2));
  const double xz = cosine_similarity(table.row(1), table.row(4));
  const double yz = cosine_similarity(table.row(2), table.row(4));
  check(xy > xz && xy > yz, "cos(X,Y) not above disjoint pairs");
  out.detail = "grad rel err " + fmt("%.2g", worst) + ", cos(X,Y)=" + fmt("%.3f", xy) + " vs " +
               fmt("%.3f", std::max(xz, yz)) + (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// ---------------------------------------------------------------------------------------------
// A5: end-to-end on a 12^3 stripe snippet.

LevelGrid stripe_snippet() {
  const Shape3 s{12, 12, 12};
  std::vector<TokenId> v(static_cast<std::size_t>(s.volume()));
  for (int d = 0; d < s.d; ++d)
    for (int h = 0; h < s.h; ++h)
      for (int w = 0; w < s.w; ++w) v[(static_cast<std::size_t>(d) * s.h + h) * s.w + w] = (w / 2) % 2;
  return LevelGrid(s, {"air", "stone"}, v);
}

json toy_config(int steps, int samples) {
  return {{"input", "stripes.json"},
          {"seed", 1234},
          {"embedding", {{"dimension", 4}, {"epochs", 30}, {"subsample", false}}},
          {"pyramid", {{"factors", {1.0, 0.75, 0.5}}}},
          {"train", {{"steps_per_scale", steps}, {"network", {{"blocks", 3}, {"base_channels", 4}}}}},
          {"generate", {{"count", samples}}},
          {"evaluation", {{"pattern_sizes", {2}}, {"sample_count", samples}, {"histogram_samples", samples}}}};
}

fs::path write_config(const fs::path& dir, const json& cfg) {
  fs::create_directories(dir);
  save_level(stripe_snippet(), dir / "stripes.json", LevelFormat::json);
  std::ofstream(dir / "config.json") << cfg.dump(2);
  return dir / "config.json";
}

Outcome a5(const fs::path& work) {
  Outcome out;
  Check check{out};
  const auto dir = work / "a5";
  fs::remove_all(dir);
  const auto cfg = write_config(dir, toy_config(500, 20)).string();
  const auto run = (dir / "run").string();
  if (run_cli({"train", "--config", cfg, "--output", run}) != 0 ||
      run_cli({"generate", "--config", cfg, "--output", run}) != 0) {
    check(false, "pipeline command failed");
    return out;
  }
  const auto stack = load_stack(dir / "run" / "stack");
  const auto truth = stripe_snippet();
  const auto rec = reconstruct(stack).grid;
  std::size_t match = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    match += truth.palette()[truth.voxels()[i]] == rec.palette()[rec.voxels()[i]];
  }
  const double accuracy = static_cast<double>(match) / static_cast<double>(truth.size());
  check(accuracy >= 0.95, "reconstruction accuracy " + fmt("%.4f", accuracy));

  std::vector<LevelGrid> samples;
  for (int i = 0; i < 20; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%03d.json", i);
    samples.push_back(load_level(dir / "run" / "samples" / name));
  }
  const double variability = pairwise_variability(samples);
  check(variability > 0.0, "variability is 0");

  std::mt19937_64 rng(505);
  double gen_kl = 0.0, random_kl = 0.0;
  for (const auto& s : samples) gen_kl += tpkl_div(truth, s, {2});
  for (int i = 0; i < 20; ++i) {
    auto r = random_grid(truth.shape(), 2, rng);
    r = LevelGrid(r.shape(), truth.palette(), r.voxels());
    random_kl += tpkl_div(truth, r, {2});
  }
  gen_kl /= 20;
  random_kl /= 20;
  check(gen_kl < random_kl, "sample tpkl not below random");
  out.detail = "recon acc " + fmt("%.4f", accuracy) + ", variability " + fmt("%.2f", variability) +
               ", tpkl(n=2) " + fmt("%.3f", gen_kl) + " vs random " + fmt("%.3f", random_kl) +
               (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// ---------------------------------------------------------------------------------------------
// A6: gradient penalty of linear critics.

Outcome a6() {
  Outcome out;
  Check check{out};
  std::mt19937_64 rng(606);
  std::normal_distribution<float> dist;
  std::uniform_real_distribution<double> target(0.05, 5.0);
  std::uniform_int_distribution<int> ext(1, 4), ch(1, 3);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int c = ch(rng);
    const Shape3 s{ext(rng), ext(rng), ext(rng)};
    ad::Tensor w({c, s.d, s.h, s.w});
    for (auto& v : w.storage()) v = dist(rng);
    double n2 = 0.0;
    for (float v : w.storage()) n2 += static_cast<double>(v) * v;
    const double scale = target(rng) / std::sqrt(n2);
    for (auto& v : w.storage()) v = static_cast<float>(v * scale);
    n2 = 0.0;
    for (float v : w.storage()) n2 += static_cast<double>(v) * v;
    const double lambda = 0.1;
    auto weights = std::make_shared<const ad::Tensor>(w);
    const Critic critic = [weights](const ad::Var& x) { return ad::sum(ad::mask_mul(x, weights)); };
    Field real(c, s), fake(c, s);
    for (auto& v : real.storage()) v = dist(rng);
    for (auto& v : fake.storage()) v = dist(rng);
    const double got = wgan_gp_loss(critic, real, fake, lambda, static_cast<std::uint64_t>(i)).penalty.item();
    const double want = lambda * (std::sqrt(n2) - 1.0) * (std::sqrt(n2) - 1.0);
    worst = std::max(worst, std::abs(got - want));
  }
  check(worst <= 1e-6, "max error " + fmt("%.3g", worst));
  out.detail = "50 critics, max err " + fmt("%.2g", worst) + (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// ---------------------------------------------------------------------------------------------
// A7: codec round trips and style-edit equivalence.

Outcome a7(const fs::path& work) {
  Outcome out;
  Check check{out};
  std::mt19937_64 rng(707);
  std::uniform_int_distribution<int> ext(1, 8), kk(1, 9), mm(1, 40);
  std::normal_distribution<double> dist;
  int failures = 0;
  for (int i = 0; i < 100; ++i) {
    const int k = kk(rng), m = mm(rng);
    const auto g = random_grid({ext(rng), ext(rng), ext(rng)}, k, rng);
    std::vector<double> rows(static_cast<std::size_t>(k) * m);
    for (auto& v : rows) v = dist(rng);
    const EmbeddingTable table(m, g.palette(), rows);
    if (!(decode_level(encode_level(g, table), table) == g)) ++failures;
  }
  check(failures == 0, std::to_string(failures) + " codec mismatches");

  // Style edits through the CLI against a token-wise remap of unedited output.
  const auto dir = work / "a7";
  fs::remove_all(dir);
  const auto cfg = write_config(dir, toy_config(40, 1)).string();
  const auto run = (dir / "run").string();
  if (run_cli({"train", "--config", cfg, "--output", run}) != 0) {
    check(false, "train failed");
    return out;
  }
  std::ofstream(dir / "style.json") << R"({"stone": "sandstone", "air": "cave_air"})";
  const auto style = load_style_map(dir / "style.json");
  int edit_failures = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const auto plain_dir = dir / ("plain_" + std::to_string(seed));
    const auto edit_dir = dir / ("edit_" + std::to_string(seed));
    const auto s = std::to_string(seed);
    if (run_cli({"generate", "--config", cfg, "--stack", run + "/stack", "--seed", s, "--output", plain_dir.string()}) != 0 ||
        run_cli({"generate", "--config", cfg, "--stack", run + "/stack", "--seed", s, "--output", edit_dir.string(),
                 "--style-map", (dir / "style.json").string()}) != 0) {
      ++edit_failures;
      continue;
    }
    const auto plain = load_level(plain_dir / "samples" / "sample_000.json");
    const auto edited = load_level(edit_dir / "samples" / "sample_000.json");
    bool same = plain.shape() == edited.shape();
    for (std::size_t v = 0; same && v < plain.size(); ++v) {
      const auto& name = plain.palette()[plain.voxels()[v]];
      const auto it = style.mapping.find(name);
      same = edited.palette()[edited.voxels()[v]] == (it == style.mapping.end() ? name : it->second);
    }
    if (!same || !(apply_style_map(plain, style) == edited)) ++edit_failures;
  }
  check(edit_failures == 0, std::to_string(edit_failures) + " style-edit mismatches");
  if (out.pass) out.detail = "100 round trips, 10 edited seeds";
  return out;
}

// ---------------------------------------------------------------------------------------------
// A8: two full pipeline runs, compared byte for byte (logs excluded: they hold timestamps).

std::map<std::string, std::string> artifacts(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).generic_string();
    if (rel.rfind("logs/", 0) == 0) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[rel].assign(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

Outcome a8(const fs::path& work) {
  Outcome out;
  Check check{out};
  const auto dir = work / "a8";
  fs::remove_all(dir);
  const auto cfg = write_config(dir, toy_config(60, 4)).string();
  for (const char* name : {"run_a", "run_b"}) {
    const auto run = (dir / name).string();
    for (const char* cmd : {"train-embeddings", "train", "generate", "evaluate"}) {
      if (run_cli({cmd, "--config", cfg, "--output", run}) != 0) {
        check(false, std::string(cmd) + " failed");
        return out;
      }
    }
  }
  const auto a = artifacts(dir / "run_a"), b = artifacts(dir / "run_b");
  check(a.size() >= 10, "too few artifacts");
  check(a.size() == b.size(), "artifact sets differ");
  int differing = 0;
  for (const auto& [name, content] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != content) {
      ++differing;
      check(false, name + " differs");
    }
  }
  if (out.pass) out.detail = std::to_string(a.size()) + " artifacts identical";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"worldgan acceptance criteria"};
  std::string workdir = (fs::temp_directory_path() / "worldgan_acceptance").string();
  std::vector<std::string> only;
  app.add_option("--workdir", workdir, "Scratch directory for pipeline runs");
  app.add_option("--only", only, "Run a subset, e.g. --only A1 A5");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  struct Criterion {
    const char* id;
    const char* title;
    double budget_s;  // 0 = none
    std::function<Outcome()> run;
  };
  const fs::path work(workdir);
  const std::vector<Criterion> criteria = {
      {"A1", "tpkl_div matches brute-force oracle", 10.0, a1},
      {"A2", "levenshtein matches DP oracle", 5.0, a2},
      {"A3", "memory and bounding-box figures", 0.0, a3},
      {"A4", "block2vec properties", 60.0, a4},
      {"A5", "desk-scale end-to-end GAN", 900.0, [&] { return a5(work); }},
      {"A6", "gradient penalty closed form", 0.0, a6},
      {"A7", "codec and style-edit exactness", 0.0, [&] { return a7(work); }},
      {"A8", "bitwise-reproducible pipeline", 0.0, [&] { return a8(work); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double t = seconds_since(t0);
    if (c.budget_s > 0 && t > c.budget_s) {
      o.pass = false;
      o.detail += "; over budget " + fmt("%.0f s", c.budget_s);
    }
    std::cout << c.id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << c.title << "  [" << o.detail << "] ("
              << fmt("%.2f", t) << " s)" << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
