#include "worldgan/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "worldgan/errors.hpp"

namespace worldgan::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Bad invocation or missing input; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
void read_field(const ordered_json& obj, const char* key, T& target, const std::string& section) {
  if (auto it = obj.find(key); it != obj.end()) {
    try {
      target = it->get<T>();
    } catch (const ordered_json::exception&) {
      throw ValidationError("config field '" + section + "." + key + "' has the wrong type");
    }
  }
}

void check_keys(const ordered_json& obj, std::initializer_list<const char*> keys, const std::string& section) {
  if (!obj.is_object()) throw ValidationError("config section '" + section + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ValidationError("unknown key '" + key + "' in config section '" + section + "'");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string source_name(EmbeddingSource s) {
  switch (s) {
    case EmbeddingSource::block2vec: return "block2vec";
    case EmbeddingSource::external: return "external";
    case EmbeddingSource::onehot: return "onehot";
  }
  return "";
}

const char* axis_name(SliceAxis a) { return a == SliceAxis::d ? "d" : a == SliceAxis::h ? "h" : "w"; }

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_parent(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create '" + path.parent_path().string() + "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void require_exists(const fs::path& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " is not set");
  if (!fs::exists(path)) throw UsageError(what + " '" + path.string() + "' does not exist");
}

// Appends timestamped lines to logs/<command>.log and echoes them to stderr.
class RunLog {
 public:
  RunLog(const RunLayout& layout, const std::string& command) {
    std::error_code ec;
    fs::create_directories(layout.logs(), ec);
    out_.open(layout.logs() / (command + ".log"), std::ios::app);
  }
  void operator()(const std::string& message) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    if (out_) out_ << '[' << stamp << "] " << message << '\n' << std::flush;
    std::cerr << message << '\n';
  }

 private:
  std::ofstream out_;
};

struct Context {
  RunConfig config;
  RunLayout layout;
  std::string hash;

  [[nodiscard]] std::string metadata(std::uint64_t seed) const {
    ordered_json m{{"config_hash", hash}, {"seed", seed}};
    return m.dump();
  }
};

Context make_context(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                     const std::string& output) {
  Context ctx;
  if (!config_path.empty()) {
    if (!fs::exists(config_path)) throw UsageError("config file '" + config_path + "' does not exist");
    ctx.config = load_run_config(config_path);
  }
  if (seed) {
    ctx.config.seed = *seed;
    ctx.config.embedding.seed.reset();
    ctx.config.train_seed.reset();
    ctx.config.generate.seed.reset();
  }
  if (!output.empty()) ctx.config.output = output;
  ctx.layout.root = ctx.config.output;
  ctx.hash = config_hash(ctx.config);
  return ctx;
}

LevelGrid load_input(const RunConfig& config) {
  require_exists(config.input, "input level");
  return config.input_format ? load_level(config.input, *config.input_format) : load_level(config.input);
}

EmbeddingTable make_embeddings(const Context& ctx, const LevelGrid& grid, RunLog& log,
                               std::vector<double>* epoch_losses) {
  const auto& e = ctx.config.embedding;
  switch (e.source) {
    case EmbeddingSource::external:
      require_exists(e.path, "external embedding file");
      return load_embeddings(e.path);
    case EmbeddingSource::onehot:
      return one_hot_table(grid.palette());
    case EmbeddingSource::block2vec: {
      const auto stats = token_stats(grid);
      const auto pairs = build_context_dataset(grid, e.neighborhood, stats, ctx.config.embedding_seed(), e.subsample);
      log("block2vec: " + std::to_string(pairs.size()) + " context pairs, m=" + std::to_string(e.dimension));
      auto trained = train_embeddings(pairs, grid.palette(), e.dimension, e.epochs, e.learning_rate,
                                      ctx.config.embedding_seed());
      for (std::size_t i = 0; i < trained.epoch_losses.size(); ++i) {
        log("epoch " + std::to_string(i + 1) + " loss " + std::to_string(trained.epoch_losses[i]));
      }
      if (epoch_losses) *epoch_losses = trained.epoch_losses;
      return std::move(trained.table);
    }
  }
  throw ValidationError("unknown embedding source");
}

void write_embeddings(const Context& ctx, const EmbeddingTable& table, const std::vector<double>& losses) {
  ensure_parent(ctx.layout.embedding_file());
  save_embeddings(table, ctx.layout.embedding_file(), ctx.metadata(ctx.config.embedding_seed()));
  ordered_json doc{{"config_hash", ctx.hash},
                   {"source", source_name(ctx.config.embedding.source)},
                   {"epoch_losses", losses}};
  write_text(ctx.layout.embeddings() / "losses.json", doc.dump(2) + "\n");
}

int cmd_train_embeddings(const Context& ctx) {
  RunLog log(ctx.layout, "train-embeddings");
  const auto grid = load_input(ctx.config);
  std::vector<double> losses;
  const auto table = make_embeddings(ctx, grid, log, &losses);
  write_embeddings(ctx, table, losses);
  log("wrote " + ctx.layout.embedding_file().string());
  return kSuccess;
}

int cmd_train(const Context& ctx) {
  RunLog log(ctx.layout, "train");
  const auto grid = load_input(ctx.config);
  EmbeddingTable table;
  if (fs::exists(ctx.layout.embedding_file())) {
    table = load_embeddings(ctx.layout.embedding_file());
    log("using embeddings " + ctx.layout.embedding_file().string());
  } else {
    std::vector<double> losses;
    table = make_embeddings(ctx, grid, log, &losses);
    write_embeddings(ctx, table, losses);
  }

  const auto& factors = ctx.config.pyramid.factors;
  const auto pyramid =
      ctx.config.pyramid.downsampling == Downsampling::dense
          ? build_pyramid(encode_level(grid, table), factors)
          : build_hierarchical_pyramid(grid, factors, build_hierarchy(token_stats(grid)), table);

  auto train_cfg = ctx.config.train;
  train_cfg.seed = ctx.config.training_seed();
  TrainingLog losses;
  const auto stack = train(pyramid, train_cfg, table, &losses, [&](const std::string& m) { log(m); });

  ordered_json meta = ordered_json::parse(ctx.metadata(train_cfg.seed));
  meta["input_shape"] = {grid.shape().d, grid.shape().h, grid.shape().w};
  meta["downsampling"] = ctx.config.pyramid.downsampling == Downsampling::dense ? "dense" : "hierarchical";
  save_stack(stack, ctx.layout.stack(), meta.dump());

  ordered_json curves{{"config_hash", ctx.hash}, {"scales", ordered_json::array()}};
  for (const auto& scale : losses) {
    ordered_json s{{"pyramid_level", scale.pyramid_level}, {"sigma", scale.sigma}};
    ordered_json critic = ordered_json::array(), penalty = ordered_json::array(),
                 adversarial = ordered_json::array(), reconstruction = ordered_json::array();
    for (const auto& step : scale.steps) {
      critic.push_back(step.critic);
      penalty.push_back(step.penalty);
      adversarial.push_back(step.adversarial);
      reconstruction.push_back(step.reconstruction);
    }
    s["critic"] = critic;
    s["penalty"] = penalty;
    s["adversarial"] = adversarial;
    s["reconstruction"] = reconstruction;
    curves["scales"].push_back(s);
  }
  write_text(ctx.layout.stack() / "losses.json", curves.dump(1) + "\n");
  log("wrote " + ctx.layout.stack().string());
  return kSuccess;
}

std::string sample_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%03d.json", i);
  return buf;
}

int cmd_generate(const Context& ctx, const std::string& stack_dir, std::optional<int> count,
                 const std::vector<double>& size, const std::string& style_path) {
  RunLog log(ctx.layout, "generate");
  const fs::path dir = stack_dir.empty() ? ctx.layout.stack() : fs::path(stack_dir);
  require_exists(dir / "config.json", "generator stack");
  const auto stack = load_stack(dir);

  auto gen = ctx.config.generate;
  if (count) gen.count = *count;
  if (gen.count < 1) throw UsageError("--count must be at least 1");
  if (!size.empty()) {
    if (size.size() != 3) throw UsageError("--size takes three factors d,h,w");
    gen.size_factors = {size[0], size[1], size[2]};
  }
  if (!style_path.empty()) gen.style_map = style_path;
  std::optional<StyleMap> style;
  if (!gen.style_map.empty()) {
    require_exists(gen.style_map, "style map");
    style = load_style_map(gen.style_map);
  }
  // Validate size factors before doing any work.
  (void)sample_shapes(stack, gen.size_factors);

  const auto seed = ctx.config.generation_seed();
  ordered_json manifest{{"config_hash", ctx.hash},
                        {"seed", seed},
                        {"size_factors", gen.size_factors},
                        {"style_map", !gen.style_map.empty()},
                        {"samples", ordered_json::array()}};
  for (int i = 0; i < gen.count; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    auto out = sample(stack, gen.size_factors, s);
    auto grid = style ? apply_style_map(out.grid, *style) : std::move(out.grid);
    const auto name = sample_name(i);
    auto doc = ordered_json::parse(level_to_json(grid));
    doc["metadata"] = {{"config_hash", ctx.hash}, {"seed", s}, {"size_factors", gen.size_factors}};
    write_text(ctx.layout.samples() / name, doc.dump() + "\n");
    manifest["samples"].push_back({{"file", name}, {"seed", s}});
  }
  write_text(ctx.layout.samples() / "manifest.json", manifest.dump(2) + "\n");
  log("wrote " + std::to_string(gen.count) + " samples to " + ctx.layout.samples().string());
  return kSuccess;
}

int cmd_evaluate(const Context& ctx, const std::string& original_path, const std::string& samples_path,
                 std::optional<int> count, std::optional<int> histogram_count) {
  RunLog log(ctx.layout, "evaluate");
  auto cfg = ctx.config;
  if (!original_path.empty()) cfg.input = original_path;
  const auto original = load_input(cfg);
  const fs::path dir = samples_path.empty() ? ctx.layout.samples() : fs::path(samples_path);
  require_exists(dir / "manifest.json", "sample manifest");

  ordered_json manifest;
  try {
    manifest = ordered_json::parse(read_text(dir / "manifest.json"));
  } catch (const ordered_json::parse_error& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what());
  }
  if (!manifest.contains("samples") || !manifest["samples"].is_array()) {
    throw ParseError((dir / "manifest.json").string() + ": field 'samples' must be an array");
  }

  auto ev = cfg.evaluation;
  if (count) ev.sample_count = *count;
  if (histogram_count) ev.histogram_samples = *histogram_count;
  if (ev.sample_count < 1 || ev.histogram_samples < 1) throw UsageError("sample counts must be positive");
  const auto available = static_cast<int>(manifest["samples"].size());
  const int needed = std::max(ev.sample_count, ev.histogram_samples);
  if (available < needed) {
    throw UsageError("evaluation needs " + std::to_string(needed) + " samples, found " +
                     std::to_string(available) + " in " + dir.string());
  }

  std::vector<LevelGrid> samples;
  std::vector<std::string> names;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < needed; ++i) {
    const auto& entry = manifest["samples"][static_cast<std::size_t>(i)];
    const auto name = entry.at("file").get<std::string>();
    require_exists(dir / name, "sample");
    samples.push_back(load_level(dir / name, LevelFormat::json));
    names.push_back(name);
    seeds.push_back(entry.at("seed").get<std::uint64_t>());
  }

  ordered_json per_sample = ordered_json::array();
  double tpkl_sum = 0.0;
  std::vector<double> per_size_sum(ev.sizes.size(), 0.0);
  for (int i = 0; i < ev.sample_count; ++i) {
    const auto& g = samples[static_cast<std::size_t>(i)];
    ordered_json sizes_j;
    for (std::size_t k = 0; k < ev.sizes.size(); ++k) {
      const double v = tpkl_div(original, g, {ev.sizes[k]}, ev.epsilon);
      per_size_sum[k] += v;
      sizes_j[std::to_string(ev.sizes[k])] = v;
    }
    const double v = tpkl_div(original, g, ev.sizes, ev.epsilon);
    tpkl_sum += v;
    per_sample.push_back({{"file", names[static_cast<std::size_t>(i)]},
                          {"seed", seeds[static_cast<std::size_t>(i)]},
                          {"tpkl_div", v},
                          {"tpkl_div_per_size", sizes_j}});
  }
  ordered_json per_size;
  for (std::size_t k = 0; k < ev.sizes.size(); ++k) {
    per_size[std::to_string(ev.sizes[k])] = per_size_sum[k] / ev.sample_count;
  }

  const std::vector<LevelGrid> variability_set(samples.begin(), samples.begin() + ev.sample_count);
  ordered_json variability = nullptr;
  if (variability_set.size() >= 2) variability = pairwise_variability(variability_set, {ev.slice_axis});

  const std::vector<LevelGrid> hist_set(samples.begin(), samples.begin() + ev.histogram_samples);
  const auto hist = histogram_report(original, hist_set);

  ordered_json report;
  report["config_hash"] = ctx.hash;
  report["protocol"] = {{"pattern_sizes", ev.sizes},
                        {"epsilon", ev.epsilon},
                        {"sample_count", ev.sample_count},
                        {"histogram_samples", ev.histogram_samples},
                        {"slice_axis", axis_name(ev.slice_axis)},
                        {"seeds", ordered_json(std::vector<std::uint64_t>(seeds.begin(), seeds.begin() + ev.sample_count))}};
  report["metrics"] = {{"tpkl_div_mean", tpkl_sum / ev.sample_count},
                       {"tpkl_div_per_size", per_size},
                       {"levenshtein_variability", variability}};
  report["samples"] = per_sample;
  report["histogram"] = {{"palette", hist.palette},
                         {"reference", hist.reference},
                         {"mean", hist.mean},
                         {"variance", hist.variance},
                         {"sample_count", hist.sample_count}};
  const auto path = ctx.layout.reports() / "evaluation.json";
  write_text(path, report.dump(2) + "\n");
  std::cout << "tpkl_div_mean " << report["metrics"]["tpkl_div_mean"].dump() << '\n';
  if (!variability.is_null()) std::cout << "levenshtein_variability " << variability.dump() << '\n';
  log("wrote " + path.string());
  return kSuccess;
}

int cmd_edit_style(const std::string& input, const std::string& style_path, const std::string& output) {
  require_exists(input, "input snippet");
  require_exists(style_path, "style map");
  if (output.empty()) throw UsageError("--output is required");
  const auto grid = load_level(input);
  const auto edited = apply_style_map(grid, load_style_map(style_path));
  ensure_parent(output);
  save_level(edited, output, format_from_extension(output));
  return kSuccess;
}

std::vector<std::int64_t> parse_shape(const std::string& text) {
  std::vector<std::int64_t> shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(part, &used);
    } catch (const std::exception&) {
      throw UsageError("shape entry '" + part + "' is not an integer");
    }
    if (used != part.size()) throw UsageError("shape entry '" + part + "' is not an integer");
    if (v < 1) throw UsageError("shape entries must be positive");
    shape.push_back(v);
  }
  if (shape.empty()) throw UsageError("--shape needs at least one extent");
  return shape;
}

int cmd_estimate_memory(const std::string& shape_text, std::int64_t channels, std::int64_t bytes) {
  if (channels < 1 || bytes < 1) throw UsageError("--channels and --bytes must be positive");
  const auto fp = memory_footprint(parse_shape(shape_text), channels, bytes);
  std::cout << "values " << fp.values << '\n' << "bytes " << fp.bytes << '\n' << fp.formatted() << " MB\n";
  return kSuccess;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(std::string("run config: ") + e.what());
  }
  check_keys(doc, {"input", "input_format", "output", "seed", "embedding", "pyramid", "train", "generate", "evaluation"},
             "root");
  RunConfig c;
  std::string s;
  read_field(doc, "input", s, "root");
  c.input = resolve(base_dir, s);
  if (doc.contains("input_format")) {
    s.clear();
    read_field(doc, "input_format", s, "root");
    c.input_format = parse_level_format(s);
  }
  if (doc.contains("output")) {
    s.clear();
    read_field(doc, "output", s, "root");
    c.output = resolve(base_dir, s);
  }
  read_field(doc, "seed", c.seed, "root");

  if (auto it = doc.find("embedding"); it != doc.end()) {
    const auto& e = *it;
    check_keys(e, {"source", "dimension", "epochs", "learning_rate", "neighborhood", "subsample", "seed", "path"},
               "embedding");
    if (e.contains("source")) {
      std::string src;
      read_field(e, "source", src, "embedding");
      if (src == "block2vec") c.embedding.source = EmbeddingSource::block2vec;
      else if (src == "external") c.embedding.source = EmbeddingSource::external;
      else if (src == "onehot") c.embedding.source = EmbeddingSource::onehot;
      else throw ValidationError("embedding.source must be block2vec, external or onehot");
    }
    read_field(e, "dimension", c.embedding.dimension, "embedding");
    read_field(e, "epochs", c.embedding.epochs, "embedding");
    read_field(e, "learning_rate", c.embedding.learning_rate, "embedding");
    if (e.contains("neighborhood")) {
      std::string nb;
      read_field(e, "neighborhood", nb, "embedding");
      c.embedding.neighborhood = parse_neighborhood(nb);
    }
    read_field(e, "subsample", c.embedding.subsample, "embedding");
    if (e.contains("seed")) {
      std::uint64_t seed = 0;
      read_field(e, "seed", seed, "embedding");
      c.embedding.seed = seed;
    }
    std::string p;
    read_field(e, "path", p, "embedding");
    c.embedding.path = resolve(base_dir, p);
  }
  if (c.embedding.dimension < 1) throw ValidationError("embedding.dimension must be positive");
  if (c.embedding.epochs < 1) throw ValidationError("embedding.epochs must be positive");
  if (!(c.embedding.learning_rate > 0.0)) throw ValidationError("embedding.learning_rate must be positive");
  if (c.embedding.source == EmbeddingSource::external && c.embedding.path.empty()) {
    throw ValidationError("embedding.path is required for external embeddings");
  }

  if (auto it = doc.find("pyramid"); it != doc.end()) {
    check_keys(*it, {"factors", "downsampling"}, "pyramid");
    read_field(*it, "factors", c.pyramid.factors, "pyramid");
    if (it->contains("downsampling")) {
      std::string mode;
      read_field(*it, "downsampling", mode, "pyramid");
      if (mode == "dense") c.pyramid.downsampling = Downsampling::dense;
      else if (mode == "hierarchical") c.pyramid.downsampling = Downsampling::hierarchical;
      else throw ValidationError("pyramid.downsampling must be dense or hierarchical");
    }
  }
  (void)compute_scale_shapes(Shape3{64, 64, 64}, c.pyramid.factors);  // factor checks only

  if (auto it = doc.find("train"); it != doc.end()) {
    c.train = train_config_from_json(it->dump());
    if (it->contains("seed")) c.train_seed = c.train.seed;
  }

  if (auto it = doc.find("generate"); it != doc.end()) {
    check_keys(*it, {"count", "size_factors", "seed", "style_map"}, "generate");
    read_field(*it, "count", c.generate.count, "generate");
    std::vector<double> sf;
    read_field(*it, "size_factors", sf, "generate");
    if (it->contains("size_factors")) {
      if (sf.size() != 3) throw ValidationError("generate.size_factors must have three entries");
      c.generate.size_factors = {sf[0], sf[1], sf[2]};
    }
    if (it->contains("seed")) {
      std::uint64_t seed = 0;
      read_field(*it, "seed", seed, "generate");
      c.generate.seed = seed;
    }
    std::string p;
    read_field(*it, "style_map", p, "generate");
    c.generate.style_map = resolve(base_dir, p);
  }
  if (c.generate.count < 1) throw ValidationError("generate.count must be positive");
  for (double f : c.generate.size_factors) {
    if (!(f > 0.0)) throw ValidationError("generate.size_factors must be positive");
  }

  if (auto it = doc.find("evaluation"); it != doc.end()) {
    check_keys(*it, {"pattern_sizes", "epsilon", "sample_count", "histogram_samples", "slice_axis"}, "evaluation");
    read_field(*it, "pattern_sizes", c.evaluation.sizes, "evaluation");
    read_field(*it, "epsilon", c.evaluation.epsilon, "evaluation");
    read_field(*it, "sample_count", c.evaluation.sample_count, "evaluation");
    read_field(*it, "histogram_samples", c.evaluation.histogram_samples, "evaluation");
    if (it->contains("slice_axis")) {
      std::string axis;
      read_field(*it, "slice_axis", axis, "evaluation");
      c.evaluation.slice_axis = parse_slice_axis(axis);
    }
  }
  if (c.evaluation.sizes.empty()) throw ValidationError("evaluation.pattern_sizes must not be empty");
  for (int n : c.evaluation.sizes) {
    if (n < 1) throw ValidationError("evaluation.pattern_sizes must be positive");
  }
  if (!(c.evaluation.epsilon > 0.0)) throw ValidationError("evaluation.epsilon must be positive");
  if (c.evaluation.sample_count < 1 || c.evaluation.histogram_samples < 1) {
    throw ValidationError("evaluation sample counts must be positive");
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_text(path), path.parent_path());
}

std::string canonical_config(const RunConfig& c) {
  ordered_json j;
  j["input"] = c.input.filename().string();
  j["input_format"] = c.input_format ? (*c.input_format == LevelFormat::json ? "json" : "csv-flat") : "auto";
  j["seed"] = c.seed;
  j["embedding"] = {{"source", source_name(c.embedding.source)},
                    {"dimension", c.embedding.dimension},
                    {"epochs", c.embedding.epochs},
                    {"learning_rate", c.embedding.learning_rate},
                    {"neighborhood", "axis6"},
                    {"subsample", c.embedding.subsample},
                    {"seed", c.embedding_seed()},
                    {"path", c.embedding.path.filename().string()}};
  j["pyramid"] = {{"factors", c.pyramid.factors},
                  {"downsampling", c.pyramid.downsampling == Downsampling::dense ? "dense" : "hierarchical"}};
  auto train = c.train;
  train.seed = c.training_seed();
  j["train"] = ordered_json::parse(train_config_to_json(train));
  j["generate"] = {{"count", c.generate.count},
                   {"size_factors", c.generate.size_factors},
                   {"seed", c.generation_seed()},
                   {"style_map", c.generate.style_map.filename().string()}};
  j["evaluation"] = {{"pattern_sizes", c.evaluation.sizes},
                     {"epsilon", c.evaluation.epsilon},
                     {"sample_count", c.evaluation.sample_count},
                     {"histogram_samples", c.evaluation.histogram_samples},
                     {"slice_axis", axis_name(c.evaluation.slice_axis)}};
  return j.dump();
}

std::string config_hash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_config(config))));
  return buf;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"worldgan: single-example 3D level generation"};
  app.require_subcommand(1);

  std::string config_path, output;
  std::optional<std::uint64_t> seed;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)");
    sub->add_option("--seed", seed, "Override every seed in the config");
    sub->add_option("--output", output, "Run directory (overrides config.output)");
  };

  auto* te = app.add_subcommand("train-embeddings", "Train token embeddings for the input snippet");
  add_common(te);
  auto* tr = app.add_subcommand("train", "Train the multi-scale generator stack");
  add_common(tr);

  auto* ge = app.add_subcommand("generate", "Sample snippets from a trained stack");
  add_common(ge);
  std::string stack_dir, style_path;
  std::optional<int> count;
  std::vector<double> size;
  ge->add_option("--stack", stack_dir, "Stack directory (default <run>/stack)");
  ge->add_option("--count", count, "Number of samples");
  ge->add_option("--size", size, "Size factors d,h,w")->delimiter(',');
  ge->add_option("--style-map", style_path, "Rename tokens after decoding");

  auto* ev = app.add_subcommand("evaluate", "Score samples against the input snippet");
  add_common(ev);
  std::string original, samples_dir;
  std::optional<int> eval_count, hist_count;
  ev->add_option("--original", original, "Reference snippet (default config.input)");
  ev->add_option("--samples", samples_dir, "Sample directory (default <run>/samples)");
  ev->add_option("--count", eval_count, "Samples used for TPKL-Div and variability");
  ev->add_option("--histogram-count", hist_count, "Samples used for the histogram");

  auto* es = app.add_subcommand("edit-style", "Apply a token rename map to a snippet");
  std::string edit_input, edit_style, edit_output;
  es->add_option("--input", edit_input, "Snippet file")->required();
  es->add_option("--style-map", edit_style, "JSON object of name renames")->required();
  es->add_option("--output", edit_output, "Output snippet file")->required();

  auto* em = app.add_subcommand("estimate-memory", "Storage of an encoded snippet");
  std::string shape_text;
  std::int64_t channels = 0, bytes = 4;
  em->add_option("--shape", shape_text, "Comma-separated extents")->required();
  em->add_option("--channels", channels, "Values per cell")->required();
  em->add_option("--bytes", bytes, "Bytes per value");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e);
      return kSuccess;
    }
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*es) return cmd_edit_style(edit_input, edit_style, edit_output);
    if (*em) return cmd_estimate_memory(shape_text, channels, bytes);
    const auto ctx = make_context(config_path, seed, output);
    if (*te) return cmd_train_embeddings(ctx);
    if (*tr) return cmd_train(ctx);
    if (*ge) return cmd_generate(ctx, stack_dir, count, size, style_path);
    if (*ev) return cmd_evaluate(ctx, original, samples_dir, eval_count, hist_count);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace worldgan::cli
