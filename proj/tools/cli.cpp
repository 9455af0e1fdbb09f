#include "cli.hpp"

#include "semuv/edit_service.hpp"
#include "semuv/gan_training.hpp"
#include "semuv/generator.hpp"
#include "semuv/latent_boundaries.hpp"
#include "semuv/mesh_render.hpp"
#include "semuv/metrics.hpp"
#include "semuv/projection.hpp"
#include "semuv/random.hpp"
#include "semuv/synthetic_faces.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace semuv::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void log_config(std::ostream& err, const std::string& command, const json& config) {
  err << "semuv " << command << " config " << config.dump() << '\n';
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("--range expects MIN:MAX, got '" + text + "'");
  try {
    std::size_t used = 0;
    const double lo = std::stod(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("trailing characters");
    const std::string rest = text.substr(colon + 1);
    const double hi = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("trailing characters");
    if (!(lo <= hi)) throw UsageError("--range minimum exceeds maximum");
    return {lo, hi};
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw UsageError("--range expects MIN:MAX, got '" + text + "'");
  }
}

// "id=path" or a bare path (id "default").
std::pair<std::string, std::string> parse_named(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) return {"default", text};
  return {text.substr(0, eq), text.substr(eq + 1)};
}

// Dotted key=value overrides; values parse as JSON when they can.
void apply_override(json& config, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + text + "'");
  const std::string key = text.substr(0, eq), raw = text.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &config;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string stats_json(const metrics::StatTestResult& r) {
  std::ostringstream s;
  s << std::setprecision(17);
  s << "{\"k\":" << r.k << ",\"n\":" << r.n << ",\"p_value\":" << metrics::format_p_value(r.p_value)
    << ",\"p_value_exact\":" << r.p_value << "}";
  return s.str();
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> read_pairs_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      std::size_t used_k = 0, used_n = 0;
      const std::string ks = line.substr(0, comma), ns = line.substr(comma + 1);
      const long long k = std::stoll(ks, &used_k);
      const long long n = std::stoll(ns, &used_n);
      if (used_k != ks.size() || ns.find_first_not_of(" \t", used_n) != std::string::npos) {
        throw std::invalid_argument("trailing characters");
      }
      if (k < 0 || n < 0) throw std::invalid_argument("negative count");
      pairs.emplace_back(k, n);
    } catch (const std::exception&) {
      if (line_no == 1) continue;  // header
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 'k,n'");
    }
  }
  if (pairs.empty()) throw std::runtime_error(path.string() + ": no k,n rows");
  return pairs;
}

render::HeadMesh load_mesh(const std::string& path) {
  return path.empty() ? render::make_head_mesh() : render::load_obj(path);
}

UVTextureMap views_strip(const std::array<render::RenderedImage, 3>& views) {
  std::vector<UVTextureMap> images{views[0].image, views[1].image, views[2].image};
  return hconcat(images);
}

// ---------------------------------------------------------------------------

struct Options {
  // gen-corpus
  std::size_t corpus_n = 2000;
  int res = 64;
  std::uint64_t seed = 0;
  std::string out;
  // train-gan
  std::string corpus;
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<int> epochs, images_per_epoch, batch_size, checkpoint_every, eval_samples;
  std::optional<double> r1_gamma;
  // model-driven commands
  std::string model;
  std::string boundaries;
  std::string attr;
  std::string latents;
  std::size_t latent_n = 2000;
  int steps = 5;
  int project_steps = 500;
  int levels = 3;
  std::string range;
  std::string in;
  std::optional<std::uint64_t> edit_seed;
  double q = 0.1;
  double lambda = 1e-3;
  int svm_epochs = 200;
  std::vector<std::string> inputs;
  std::string order = "age,gender,facial_hair";
  // render
  std::string mesh;
  std::string texture;
  std::string view = "all";
  int size = 256;
  double fov = 20.0;
  bool ambient_only = false;
  // metrics
  std::string a, b;
  std::size_t limit = 0;
  // stats
  std::optional<std::uint64_t> k, n;
  std::string csv;
  bool json_out = false;
  // serve
  std::vector<std::string> models, boundary_files;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ui_dir;
};

int cmd_gen_corpus(const Options& o, std::ostream& out, std::ostream& err) {
  log_config(err, "gen-corpus", {{"n", o.corpus_n}, {"seed", o.seed}, {"res", o.res}, {"out", o.out}});
  if (!faces::supported_resolution(o.res)) throw UsageError("unsupported resolution " + std::to_string(o.res));
  const auto corpus = faces::sample_dataset(o.corpus_n, o.seed, o.res);
  faces::export_corpus(corpus, o.out);
  out << json{{"n", corpus.size()}, {"manifest", (fs::path(o.out) / "manifest.jsonl").string()}}.dump() << '\n';
  return 0;
}

int cmd_train_gan(const Options& o, std::ostream& out, std::ostream& err) {
  const auto corpus = faces::load_corpus(o.corpus);
  if (corpus.empty()) throw std::runtime_error("corpus " + o.corpus + " is empty");
  json cfg = o.config_file.empty() ? json::object() : read_json_file(o.config_file);
  const int res = corpus.front().texture.width();
  if (!cfg.contains("generator") || !cfg["generator"].contains("resolution")) cfg["generator"]["resolution"] = res;
  if (!cfg.contains("discriminator") || !cfg["discriminator"].contains("resolution")) {
    cfg["discriminator"]["resolution"] = cfg["generator"]["resolution"];
  }
  for (const auto& s : o.overrides) apply_override(cfg, s);
  if (o.epochs) cfg["epochs"] = *o.epochs;
  if (o.images_per_epoch) cfg["images_per_epoch"] = *o.images_per_epoch;
  if (o.batch_size) cfg["batch_size"] = *o.batch_size;
  if (o.checkpoint_every) cfg["checkpoint_every"] = *o.checkpoint_every;
  if (o.eval_samples) cfg["eval_samples"] = *o.eval_samples;
  if (o.r1_gamma) cfg["r1_gamma"] = *o.r1_gamma;
  if (o.seed != 0 || !cfg.contains("seed")) cfg["seed"] = o.seed;
  gan::TrainingConfig config;
  try {
    config = gan::TrainingConfig::from_json(cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("invalid training config: ") + e.what());
  }
  log_config(err, "train-gan", config.to_json());
  const fs::path dir = o.out;
  fs::create_directories(dir);
  write_text(dir / "config.json", config.to_json().dump(2) + "\n");
  gan::TrainingHooks hooks;
  hooks.checkpoint_dir = dir / "checkpoints";
  hooks.log = [&err](const std::string& msg) { err << msg << '\n'; };
  auto result = gan::train(corpus, config, hooks);
  result.generator.save(dir / "generator.ckpt");
  result.discriminator.save(dir / "discriminator.ckpt");
  result.report.write_csv(dir / "report.csv");
  const auto& first = result.report.rows.front();
  const auto& last = result.report.rows.back();
  out << json{{"generator", (dir / "generator.ckpt").string()},
              {"report", (dir / "report.csv").string()},
              {"checkpoints", result.report.rows.size()},
              {"first_fid", first.fid},
              {"final_fid", last.fid},
              {"first_kid", first.kid},
              {"final_kid", last.kid}}
             .dump()
      << '\n';
  return 0;
}

int cmd_extract_latents(const Options& o, std::ostream& out, std::ostream& err) {
  const auto model = gen::GeneratorModel::load(o.model);
  std::vector<boundaries::LabeledLatent> samples;
  if (o.corpus.empty()) {
    log_config(err, "extract-latents",
               {{"model", o.model}, {"mode", "sample"}, {"n", o.latent_n}, {"seed", o.seed}, {"out", o.out}});
    samples = boundaries::label_generated_latents(model, o.latent_n, o.seed);
  } else {
    proj::ProjectionConfig pc;
    pc.steps = o.project_steps;
    pc.levels = o.levels;
    pc.seed = o.seed;
    log_config(err, "extract-latents",
               {{"model", o.model}, {"mode", "project"}, {"corpus", o.corpus}, {"steps", pc.steps},
                {"levels", pc.levels}, {"seed", o.seed}, {"out", o.out}});
    const auto corpus = faces::load_corpus(o.corpus);
    const std::size_t count = o.limit ? std::min(o.limit, corpus.size()) : corpus.size();
    for (std::size_t i = 0; i < count; ++i) {
      const auto r = proj::project(corpus[i].texture, model, pc);
      samples.push_back({r.w, corpus[i].attributes});
      err << "projected " << i + 1 << "/" << count << " psnr " << r.psnr_db << '\n';
    }
  }
  boundaries::save_labeled_latents(samples, o.out);
  out << json{{"latents", o.out}, {"n", samples.size()}, {"sigma_w", boundaries::latent_spread(samples)}}.dump()
      << '\n';
  return 0;
}

int cmd_train_boundary(const Options& o, std::ostream& out, std::ostream& err) {
  const auto attribute = faces::parse_attribute(o.attr);
  if (!attribute) throw UsageError("unknown attribute '" + o.attr + "'");
  boundaries::SvmConfig svm;
  svm.lambda = o.lambda;
  svm.epochs = o.svm_epochs;
  svm.seed = o.seed;
  log_config(err, "train-boundary",
             {{"latents", o.latents}, {"attr", o.attr}, {"q", o.q}, {"lambda", svm.lambda}, {"epochs", svm.epochs},
              {"seed", svm.seed}, {"out", o.out}});
  const auto samples = boundaries::load_labeled_latents(o.latents);
  const auto sets = boundaries::select_extremes(samples, *attribute, o.q);
  auto b = boundaries::train_boundary(sets.positives, sets.negatives, o.attr, svm);
  b.sigma_w = boundaries::latent_spread(samples);
  std::ifstream raw(o.latents, std::ios::binary);
  std::ostringstream buf;
  buf << raw.rdbuf();
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(buf.str())));
  b.trained_on = hash;
  boundaries::save_boundaries({b}, o.out);
  out << json{{"attribute", b.attribute}, {"heldout_accuracy", b.heldout_accuracy}, {"out", o.out}}.dump() << '\n';
  return 0;
}

int cmd_orthogonalize(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<boundaries::AttributeBoundary> all;
  for (const auto& path : o.inputs) {
    for (auto& b : boundaries::load_boundaries(path)) all.push_back(std::move(b));
  }
  std::vector<std::string> order;
  std::stringstream ss(o.order);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) order.push_back(item);
  }
  log_config(err, "orthogonalize", {{"in", o.inputs}, {"order", order}, {"out", o.out}});
  std::vector<boundaries::AttributeBoundary> ordered;
  for (const auto& name : order) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const auto& b) { return b.attribute == name; });
    if (it != all.end()) ordered.push_back(*it);
  }
  for (const auto& b : all) {
    if (std::find(order.begin(), order.end(), b.attribute) == order.end()) {
      throw UsageError("boundary '" + b.attribute + "' is not named in --order");
    }
  }
  if (ordered.empty()) throw UsageError("no boundaries to orthogonalize");
  const auto result = boundaries::orthogonalize(ordered);
  boundaries::save_boundaries(result, o.out);
  json names = json::array();
  for (const auto& b : result) names.push_back(b.attribute);
  out << json{{"order", names}, {"out", o.out}}.dump() << '\n';
  return 0;
}

int cmd_edit(const Options& o, std::ostream& out, std::ostream& err) {
  const auto model = gen::GeneratorModel::load(o.model);
  const auto set = boundaries::load_boundaries(o.boundaries);
  const auto& b = boundaries::find_boundary(set, o.attr);
  double lo, hi;
  if (o.range.empty()) {
    const double sigma = b.sigma_w > 0.0 ? b.sigma_w : gen::w_spread(model);
    lo = -3.0 * sigma;
    hi = 3.0 * sigma;
  } else {
    std::tie(lo, hi) = parse_range(o.range);
  }
  const render::HeadMesh mesh = load_mesh(o.mesh);
  json config = {{"model", o.model}, {"boundaries", o.boundaries}, {"attr", o.attr}, {"steps", o.steps},
                 {"range", {lo, hi}}, {"out", o.out}, {"size", o.size}};
  gen::LatentVector base;
  json source;
  if (!o.in.empty()) {
    proj::ProjectionConfig pc;
    pc.steps = o.project_steps;
    pc.seed = o.seed;
    config["in"] = o.in;
    config["project_steps"] = pc.steps;
    config["seed"] = pc.seed;
    log_config(err, "edit", config);
    UVTextureMap target = load_texture(o.in);
    const int res = model.config().resolution;
    if (target.width() != res || target.height() != res) target = resize_bilinear(target, res, res);
    const auto r = proj::project(target, model, pc);
    base = r.w;
    source = {{"type", "projection"}, {"psnr_db", r.psnr_db}};
  } else {
    const std::uint64_t seed = o.edit_seed.value_or(o.seed);
    config["seed"] = seed;
    log_config(err, "edit", config);
    base = gen::map_latent(model, gen::sample_z(model.config().latent_dim, seed));
    source = {{"type", "random"}, {"seed", seed}};
  }
  const fs::path dir = o.out;
  fs::create_directories(dir);
  boundaries::EditRequest req{base, o.attr, o.steps, lo, hi};
  const auto latents = boundaries::interpolation_sequence(req, set);
  const auto alphas = boundaries::alpha_schedule(o.steps, lo, hi);
  json frames = json::array();
  for (std::size_t i = 0; i < latents.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%02zu", i);
    const UVTextureMap texture = gen::synthesize(model, latents[i]);
    save_texture(texture, dir / (std::string(name) + ".png"), ImageFormat::png);
    save_texture(views_strip(render::render_views(mesh, texture, o.size)), dir / (std::string(name) + "_views.png"),
                 ImageFormat::png);
    const auto measured = faces::measure_attributes(texture);
    json scores = json::object();
    for (const auto& bb : set) scores[bb.attribute] = bb.score(latents[i]);
    frames.push_back({{"alpha", alphas[i]},
                      {"texture", (dir / (std::string(name) + ".png")).string()},
                      {"views", (dir / (std::string(name) + "_views.png")).string()},
                      {"scores", scores},
                      {"measured", {{"age", measured.age}, {"facial_hair", measured.facial_hair}, {"gender", measured.gender}}}});
  }
  out << json{{"attribute", o.attr}, {"source", source}, {"frames", frames}}.dump() << '\n';
  return 0;
}

int cmd_project(const Options& o, std::ostream& out, std::ostream& err) {
  const auto model = gen::GeneratorModel::load(o.model);
  proj::ProjectionConfig pc;
  pc.steps = o.project_steps;
  pc.levels = o.levels;
  pc.seed = o.seed;
  log_config(err, "project",
             {{"model", o.model}, {"in", o.in}, {"steps", pc.steps}, {"levels", pc.levels}, {"seed", pc.seed},
              {"out", o.out}});
  const UVTextureMap target = load_texture(o.in);
  const auto r = proj::project(target, model, pc);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  std::vector<UVTextureMap> pair{target, r.reconstruction};
  save_texture(hconcat(pair), dir / "comparison.png", ImageFormat::png);
  save_texture(r.reconstruction, dir / "reconstruction.png", ImageFormat::png);
  json result = r.to_json();
  write_text(dir / "projection.json", result.dump(2) + "\n");
  result.erase("loss_curve");
  out << result.dump() << '\n';
  return 0;
}

int cmd_render(const Options& o, std::ostream& out, std::ostream& err) {
  log_config(err, "render",
             {{"texture", o.texture}, {"mesh", o.mesh.empty() ? "builtin" : o.mesh}, {"view", o.view},
              {"size", o.size}, {"fov", o.fov}, {"ambient_only", o.ambient_only}, {"out", o.out}});
  const render::HeadMesh mesh = load_mesh(o.mesh);
  const UVTextureMap texture = load_texture(o.texture);
  const render::Light light = o.ambient_only ? render::Light::ambient_only() : render::Light{};
  UVTextureMap image;
  if (o.view == "all") {
    image = views_strip(render::render_views(mesh, texture, o.size, light, o.fov));
  } else {
    const auto v = render::parse_view(o.view);
    if (!v) throw UsageError("--view must be front, left, right or all");
    image = render::render(mesh, texture, render::view_camera(mesh, *v, o.size, o.fov), light).image;
  }
  save_texture(image, o.out, ImageFormat::png);
  out << json{{"out", o.out}, {"width", image.width()}, {"height", image.height()}}.dump() << '\n';
  return 0;
}

int cmd_metrics(const Options& o, std::ostream& out, std::ostream& err) {
  const metrics::FeatureExtractor fx;
  log_config(err, "metrics", {{"a", o.a}, {"b", o.b}, {"limit", o.limit}, {"extractor_seed", fx.seed_name()}});
  auto features = [&](const std::string& path) {
    auto corpus = faces::load_corpus(path);
    if (o.limit && corpus.size() > o.limit) corpus.resize(o.limit);
    std::vector<UVTextureMap> images;
    for (auto& item : corpus) images.push_back(std::move(item.texture));
    return fx.extract_all(images);
  };
  const auto fa = features(o.a);
  const auto fb = features(o.b);
  out << json{{"fid", metrics::fid(fa, fb)},
              {"kid", metrics::kid(fa, fb)},
              {"n_a", fa.size()},
              {"n_b", fb.size()},
              {"extractor_seed", fx.seed_name()}}
             .dump()
      << '\n';
  return 0;
}

int cmd_stats(const Options& o, std::ostream& out, std::ostream& err) {
  if (!o.csv.empty()) {
    log_config(err, "stats", {{"csv", o.csv}, {"json", o.json_out}});
    const auto pairs = read_pairs_csv(o.csv);
    if (o.json_out) {
      out << '[';
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        out << (i ? "," : "") << stats_json(metrics::binomial_test_one_sided(pairs[i].first, pairs[i].second));
      }
      out << "]\n";
    } else {
      out << "row  k    n    p_value\n";
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto r = metrics::binomial_test_one_sided(pairs[i].first, pairs[i].second);
        out << std::left << std::setw(5) << i + 1 << std::setw(5) << r.k << std::setw(5) << r.n
            << metrics::format_p_value(r.p_value) << '\n';
      }
    }
    return 0;
  }
  if (!o.k || !o.n) throw UsageError("stats needs --k and --n, or --csv");
  log_config(err, "stats", {{"k", *o.k}, {"n", *o.n}});
  out << stats_json(metrics::binomial_test_one_sided(*o.k, *o.n)) << '\n';
  return 0;
}

int cmd_serve(const Options& o, std::ostream&, std::ostream& err) {
  service::ServiceConfig sc;
  sc.render_size = o.size;
  sc.workers = service::threads_from_env();
  sc.projection.steps = o.project_steps;
  sc.projection.seed = o.seed;
  json config = {{"host", o.host}, {"port", o.port}, {"models", o.models}, {"boundaries", o.boundary_files},
                 {"mesh", o.mesh.empty() ? "builtin" : o.mesh}, {"ui_dir", o.ui_dir}, {"render_size", sc.render_size},
                 {"workers", sc.workers}, {"project_steps", sc.projection.steps}, {"seed", o.seed}};
  log_config(err, "serve", config);
  service::EditService svc(sc, load_mesh(o.mesh));
  for (const auto& m : o.models) {
    const auto [id, path] = parse_named(m);
    svc.add_model(id, std::make_shared<const gen::GeneratorModel>(gen::GeneratorModel::load(path)));
  }
  for (const auto& bpath : o.boundary_files) {
    const auto [id, path] = parse_named(bpath);
    svc.add_boundaries(id, boundaries::load_boundaries(path));
  }
  httplib::Server server;
  service::register_routes(server, svc, o.ui_dir);
  if (!server.bind_to_port(o.host, o.port)) throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(o.port));
  err << "listening on http://" << o.host << ":" << o.port << '\n';
  server.listen_after_bind();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic UV texture synthesis and editing", "semuv"};
  app.require_subcommand(1);
  Options o;

  auto* gen_corpus = app.add_subcommand("gen-corpus", "Write a seeded synthetic texture corpus");
  gen_corpus->add_option("--n", o.corpus_n, "Number of textures")->capture_default_str();
  gen_corpus->add_option("--seed", o.seed, "Corpus seed")->capture_default_str();
  gen_corpus->add_option("--res", o.res, "Resolution (32, 64, 128 or 256)")->capture_default_str();
  gen_corpus->add_option("--out", o.out, "Output directory")->required();

  auto* train_gan = app.add_subcommand("train-gan", "Train the generator on a corpus");
  train_gan->add_option("--corpus", o.corpus, "Corpus directory or manifest")->required();
  train_gan->add_option("--out", o.out, "Output directory")->required();
  train_gan->add_option("--config", o.config_file, "JSON training config");
  train_gan->add_option("--set", o.overrides, "Config override key=value (dotted keys allowed)");
  train_gan->add_option("--epochs", o.epochs, "Epochs");
  train_gan->add_option("--images-per-epoch", o.images_per_epoch, "Images sampled per epoch");
  train_gan->add_option("--batch", o.batch_size, "Batch size");
  train_gan->add_option("--checkpoint-every", o.checkpoint_every, "Checkpoint cadence in epochs");
  train_gan->add_option("--eval-samples", o.eval_samples, "Samples per FID/KID evaluation");
  train_gan->add_option("--r1-gamma", o.r1_gamma, "R1 penalty weight (0 disables)");
  train_gan->add_option("--seed", o.seed, "Training seed")->capture_default_str();

  auto* extract = app.add_subcommand("extract-latents", "Label W latents with the attribute oracle");
  extract->add_option("--model", o.model, "Generator checkpoint")->required();
  extract->add_option("--out", o.out, "Output JSON lines file")->required();
  extract->add_option("--n", o.latent_n, "Latents to sample")->capture_default_str();
  extract->add_option("--corpus", o.corpus, "Project this corpus instead of sampling");
  extract->add_option("--limit", o.limit, "Project at most this many corpus items (0 = all)");
  extract->add_option("--steps", o.project_steps, "Projection steps per texture")->capture_default_str();
  extract->add_option("--levels", o.levels, "Projection pyramid levels")->capture_default_str();
  extract->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();

  auto* train_boundary = app.add_subcommand("train-boundary", "Fit a linear attribute boundary in W");
  train_boundary->add_option("--latents", o.latents, "Labeled latents (JSON lines)")->required();
  train_boundary->add_option("--attr", o.attr, "age, gender or facial_hair")->required();
  train_boundary->add_option("--out", o.out, "Boundary JSON")->required();
  train_boundary->add_option("--q", o.q, "Extreme quantile per class")->capture_default_str();
  train_boundary->add_option("--lambda", o.lambda, "SVM regularization")->capture_default_str();
  train_boundary->add_option("--epochs", o.svm_epochs, "SVM epochs")->capture_default_str();
  train_boundary->add_option("--seed", o.seed, "SVM seed")->capture_default_str();

  auto* ortho = app.add_subcommand("orthogonalize", "Gram-Schmidt a set of boundaries");
  ortho->add_option("--in", o.inputs, "Boundary files")->required();
  ortho->add_option("--order", o.order, "Priority order, comma separated")->capture_default_str();
  ortho->add_option("--out", o.out, "Output boundary file")->required();

  auto* edit = app.add_subcommand("edit", "Step a latent along an attribute boundary");
  edit->add_option("--model", o.model, "Generator checkpoint")->required();
  edit->add_option("--boundaries", o.boundaries, "Boundary file")->required();
  edit->add_option("--attr", o.attr, "Attribute to edit")->required();
  edit->add_option("--steps", o.steps, "Number of steps")->capture_default_str();
  edit->add_option("--range", o.range, "Absolute alpha range MIN:MAX (default +-3 sigma_w)");
  edit->add_option("--in", o.in, "Texture to project and edit");
  edit->add_option("--seed", o.edit_seed, "Seed of a random base latent when --in is absent");
  edit->add_option("--project-steps", o.project_steps, "Projection steps for --in")->capture_default_str();
  edit->add_option("--mesh", o.mesh, "OBJ head mesh (default: built-in)");
  edit->add_option("--size", o.size, "Render size")->capture_default_str();
  edit->add_option("--out", o.out, "Output directory")->required();

  auto* project = app.add_subcommand("project", "Invert a texture into W");
  project->add_option("--model", o.model, "Generator checkpoint")->required();
  project->add_option("--in", o.in, "Target texture")->required();
  project->add_option("--out", o.out, "Output directory")->required();
  project->add_option("--steps", o.project_steps, "Optimization steps")->capture_default_str();
  project->add_option("--levels", o.levels, "Pyramid levels")->capture_default_str();
  project->add_option("--seed", o.seed, "Seed for the mean-W start")->capture_default_str();

  auto* rend = app.add_subcommand("render", "Render a texture on the head mesh");
  rend->add_option("--texture", o.texture, "Texture PNG/PPM")->required();
  rend->add_option("--out", o.out, "Output PNG")->required();
  rend->add_option("--mesh", o.mesh, "OBJ head mesh (default: built-in)");
  rend->add_option("--view", o.view, "front, left, right or all")->capture_default_str();
  rend->add_option("--size", o.size, "Image size")->capture_default_str();
  rend->add_option("--fov", o.fov, "Vertical field of view in degrees")->capture_default_str();
  rend->add_flag("--ambient-only", o.ambient_only, "Disable diffuse shading");

  auto* met = app.add_subcommand("metrics", "Surrogate FID and KID between two corpora");
  met->add_option("--a", o.a, "First corpus")->required();
  met->add_option("--b", o.b, "Second corpus")->required();
  met->add_option("--limit", o.limit, "Use at most this many images per corpus (0 = all)");

  auto* stats = app.add_subcommand("stats", "One-sided binomial test against chance");
  stats->add_option("--k", o.k, "Successes");
  stats->add_option("--n", o.n, "Trials");
  stats->add_option("--csv", o.csv, "CSV of k,n pairs");
  stats->add_flag("--json", o.json_out, "JSON output for --csv");

  auto* serve = app.add_subcommand("serve", "HTTP edit service");
  serve->add_option("--model", o.models, "Generator checkpoint, optionally id=path")->required();
  serve->add_option("--boundaries", o.boundary_files, "Boundary file, optionally id=path")->required();
  serve->add_option("--host", o.host, "Bind address")->capture_default_str();
  serve->add_option("--port", o.port, "Port")->capture_default_str();
  serve->add_option("--mesh", o.mesh, "OBJ head mesh (default: built-in)");
  serve->add_option("--ui-dir", o.ui_dir, "Static editor bundle");
  serve->add_option("--size", o.size, "Default render size")->capture_default_str();
  serve->add_option("--project-steps", o.project_steps, "Projection steps for uploads")->capture_default_str();
  serve->add_option("--seed", o.seed, "Projection seed")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen_corpus->parsed()) return cmd_gen_corpus(o, out, err);
    if (train_gan->parsed()) return cmd_train_gan(o, out, err);
    if (extract->parsed()) return cmd_extract_latents(o, out, err);
    if (train_boundary->parsed()) return cmd_train_boundary(o, out, err);
    if (ortho->parsed()) return cmd_orthogonalize(o, out, err);
    if (edit->parsed()) return cmd_edit(o, out, err);
    if (project->parsed()) return cmd_project(o, out, err);
    if (rend->parsed()) return cmd_render(o, out, err);
    if (met->parsed()) return cmd_metrics(o, out, err);
    if (stats->parsed()) return cmd_stats(o, out, err);
    if (serve->parsed()) return cmd_serve(o, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace semuv::cli
