#include "semuv/generator.hpp"

#include "semuv/nn/ops.hpp"
#include "semuv/random.hpp"

#include <cmath>

namespace semuv::gen {

using nn::Tensor;

int GeneratorConfig::blocks() const {
  int blocks = 1;
  for (int r = 4; r < resolution; r *= 2) ++blocks;
  return blocks;
}

std::vector<int> GeneratorConfig::block_channels() const {
  if (!channels.empty()) return channels;
  // Wide at coarse scales, narrow at fine scales.
  std::vector<int> out;
  for (int b = 0; b < blocks(); ++b) {
    const int res = 4 << b;
    out.push_back(res <= 8 ? 32 : res <= 16 ? 16 : res <= 32 ? 8 : 6);
  }
  return out;
}

void GeneratorConfig::validate() const {
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  if (mapping_layers < 1) throw std::invalid_argument("mapping_layers must be >= 1");
  if (resolution < 4 || (resolution & (resolution - 1)) != 0) {
    throw std::invalid_argument("resolution must be a power of two >= 4");
  }
  if (!channels.empty() && static_cast<int>(channels.size()) != blocks()) {
    throw std::invalid_argument("channels must list one entry per block (" + std::to_string(blocks()) + ")");
  }
  for (int c : block_channels()) {
    if (c < 1) throw std::invalid_argument("channel counts must be >= 1");
  }
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"latent_dim", latent_dim},   {"mapping_layers", mapping_layers}, {"resolution", resolution},
          {"blocks", blocks()},         {"channels", block_channels()},     {"seed", seed},
          {"mapping_lr_scale", mapping_lr_scale}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.mapping_layers = j.value("mapping_layers", c.mapping_layers);
  c.resolution = j.value("resolution", c.resolution);
  c.channels = j.value("channels", std::vector<int>{});
  c.seed = j.value("seed", c.seed);
  c.mapping_lr_scale = j.value("mapping_lr_scale", c.mapping_lr_scale);
  if (j.contains("blocks") && j["blocks"].get<int>() != c.blocks()) {
    throw std::invalid_argument("config blocks disagrees with resolution");
  }
  c.validate();
  return c;
}

namespace {

Tensor normal_tensor(nn::Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.normal() * stddev;
  return t;
}

// Splits a [N, 2C] style into scale and shift.
void split_style(const Tensor& style, std::size_t channels, Tensor& scale, Tensor& shift) {
  const std::size_t n = style.dim(0);
  scale = Tensor({n, channels});
  shift = Tensor({n, channels});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      scale[i * channels + c] = style[i * 2 * channels + c];
      shift[i * channels + c] = style[i * 2 * channels + channels + c];
    }
  }
}

}  // namespace

GeneratorModel::GeneratorModel(GeneratorConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng(derive_seed(config_.seed, 0x6e6e));
  const std::size_t d = config_.latent_dim;
  for (int i = 0; i < config_.mapping_layers; ++i) {
    const std::string prefix = "mapping" + std::to_string(i);
    mapping_w_.push_back(params_.add(prefix + ".weight", normal_tensor({d, d}, std::sqrt(2.0 / d), rng),
                                     config_.mapping_lr_scale));
    mapping_b_.push_back(params_.add(prefix + ".bias", Tensor({d}), config_.mapping_lr_scale));
  }
  const std::vector<int> channels = config_.block_channels();
  const_input_ = params_.add("const", normal_tensor({1, static_cast<std::size_t>(channels[0]), 4, 4}, 1.0, rng));
  std::size_t in_c = channels[0];
  for (int b = 0; b < config_.blocks(); ++b) {
    const std::size_t out_c = channels[b];
    for (int j = 0; j < 2; ++j) {
      const std::string prefix = "block" + std::to_string(b) + ".layer" + std::to_string(j);
      LayerParams lp;
      lp.channels = out_c;
      lp.conv_w = params_.add(prefix + ".conv.weight",
                              normal_tensor({out_c, in_c, 3, 3}, std::sqrt(2.0 / (9.0 * in_c)), rng));
      lp.conv_b = params_.add(prefix + ".conv.bias", Tensor({out_c}));
      lp.style_w = params_.add(prefix + ".style.weight", normal_tensor({d, 2 * out_c}, std::sqrt(1.0 / d), rng));
      Tensor style_bias({2 * out_c});
      for (std::size_t c = 0; c < out_c; ++c) style_bias[c] = 1.0;
      lp.style_b = params_.add(prefix + ".style.bias", std::move(style_bias));
      layers_.push_back(lp);
      in_c = out_c;
    }
  }
  rgb_w_ = params_.add("torgb.weight", normal_tensor({3, in_c, 3, 3}, std::sqrt(1.0 / (9.0 * in_c)), rng));
  rgb_b_ = params_.add("torgb.bias", Tensor({3}));
}

Tensor GeneratorModel::map_forward(const Tensor& z, MappingTape* tape) const {
  nn::expect_shape(z, {z.dim(0), static_cast<std::size_t>(config_.latent_dim)}, "map_latent z");
  Tensor x = z;
  for (std::size_t i = 0; i < mapping_w_.size(); ++i) {
    Tensor a = nn::dense(x, params_[mapping_w_[i]].value, params_[mapping_b_[i]].value);
    Tensor next = nn::leaky_relu(a);
    if (tape) {
      tape->inputs.push_back(std::move(x));
      tape->activations.push_back(std::move(a));
    }
    x = std::move(next);
  }
  return x;
}

Tensor GeneratorModel::map_backward(const MappingTape& tape, const Tensor& dw, bool param_grads) {
  Tensor g = dw;
  for (std::size_t i = mapping_w_.size(); i-- > 0;) {
    g = nn::leaky_relu_backward(tape.activations[i], g);
    g = nn::dense_backward(tape.inputs[i], params_[mapping_w_[i]].value, g,
                           param_grads ? &params_[mapping_w_[i]].grad : nullptr,
                           param_grads ? &params_[mapping_b_[i]].grad : nullptr);
  }
  return g;
}

Tensor GeneratorModel::synthesize_forward(const Tensor& w, SynthesisTape* tape) const {
  const std::size_t n = w.dim(0);
  nn::expect_shape(w, {n, static_cast<std::size_t>(config_.latent_dim)}, "synthesize w");
  const Tensor& c = params_[const_input_].value;
  Tensor x({n, c.dim(1), 4, 4});
  for (std::size_t i = 0; i < n; ++i) std::copy(c.values().begin(), c.values().end(), x.data() + i * c.size());
  if (tape) {
    tape->w = w;
    tape->layers.clear();
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerParams& lp = layers_[l];
    if (l % 2 == 0 && l > 0) x = nn::upsample2x_nearest(x);
    Tensor a = nn::conv3x3(x, params_[lp.conv_w].value, params_[lp.conv_b].value);
    Tensor r = nn::leaky_relu(a);
    Tensor style = nn::dense(w, params_[lp.style_w].value, params_[lp.style_b].value);
    Tensor scale, shift;
    split_style(style, lp.channels, scale, shift);
    Tensor y = nn::adain(r, scale, shift);
    if (tape) tape->layers.push_back({std::move(x), std::move(a), std::move(r), std::move(style)});
    x = std::move(y);
  }
  Tensor rgb = nn::conv3x3(x, params_[rgb_w_].value, params_[rgb_b_].value);
  Tensor image = nn::tanh_unit(rgb);
  if (tape) {
    tape->rgb_in = std::move(x);
    tape->image = image;
  }
  return image;
}

Tensor GeneratorModel::synthesize_backward(const SynthesisTape& tape, const Tensor& dimage, bool param_grads) {
  auto grad = [&](std::size_t idx) { return param_grads ? &params_[idx].grad : nullptr; };
  Tensor g = nn::tanh_unit_backward(tape.image, dimage);
  g = nn::conv3x3_backward(tape.rgb_in, params_[rgb_w_].value, g, grad(rgb_w_), grad(rgb_b_));
  Tensor dw(tape.w.shape());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const LayerParams& lp = layers_[l];
    const auto& rec = tape.layers[l];
    Tensor scale, shift;
    split_style(rec.style, lp.channels, scale, shift);
    Tensor dscale(scale.shape()), dshift(shift.shape());
    g = nn::adain_backward(rec.norm_in, scale, g, &dscale, &dshift);
    const std::size_t n = dscale.dim(0), ch = lp.channels;
    Tensor dstyle({n, 2 * ch});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < ch; ++c) {
        dstyle[i * 2 * ch + c] = dscale[i * ch + c];
        dstyle[i * 2 * ch + ch + c] = dshift[i * ch + c];
      }
    }
    dw += nn::dense_backward(tape.w, params_[lp.style_w].value, dstyle, grad(lp.style_w), grad(lp.style_b));
    g = nn::leaky_relu_backward(rec.conv_out, g);
    const bool need_dx = l > 0 || param_grads;
    g = nn::conv3x3_backward(rec.conv_in, params_[lp.conv_w].value, g, grad(lp.conv_w), grad(lp.conv_b), need_dx);
    if (l % 2 == 0 && l > 0) g = nn::upsample2x_nearest_backward(g);
  }
  if (param_grads) {
    Tensor& dconst = params_[const_input_].grad;
    const std::size_t per = dconst.size();
    for (std::size_t i = 0; i < g.dim(0); ++i) {
      for (std::size_t k = 0; k < per; ++k) dconst[k] += g[i * per + k];
    }
  }
  return dw;
}

Tensor GeneratorModel::synthesize_latent_grad(const SynthesisTape& tape, const Tensor& dimage) const {
  return const_cast<GeneratorModel*>(this)->synthesize_backward(tape, dimage, false);
}

Tensor GeneratorModel::map_batch(const Tensor& z) const { return map_forward(z, nullptr); }

Tensor GeneratorModel::synthesize_batch(const Tensor& w) const { return synthesize_forward(w, nullptr); }

void GeneratorModel::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(path, params_, {{"generator_config", config_.to_json().dump()}});
}

GeneratorModel GeneratorModel::load(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path);
  auto it = ckpt.blobs.find("generator_config");
  if (it == ckpt.blobs.end()) throw std::runtime_error(path.string() + " is not a generator checkpoint");
  GeneratorModel model(GeneratorConfig::from_json(nlohmann::json::parse(it->second)));
  nn::load_values(model.params_, ckpt);
  return model;
}

LatentVector sample_z(int dim, std::uint64_t seed) {
  Rng rng(seed);
  LatentVector z{Space::z, std::vector<double>(dim)};
  for (double& v : z.values) v = rng.normal();
  return z;
}

Tensor sample_z_batch(int dim, std::uint64_t seed, std::size_t first, std::size_t count) {
  const std::size_t d = dim;
  Tensor z({count, d});
  for (std::size_t i = 0; i < count; ++i) {
    const LatentVector v = sample_z(dim, derive_seed(seed, first + i));
    std::copy(v.values.begin(), v.values.end(), z.data() + i * d);
  }
  return z;
}

Tensor latent_to_tensor(const LatentVector& v) { return Tensor({1, v.dim()}, v.values); }

LatentVector map_latent(const GeneratorModel& model, const LatentVector& z) {
  if (z.space != Space::z) throw LatentError("map_latent expects a Z-space vector");
  if (z.dim() != static_cast<std::size_t>(model.config().latent_dim)) {
    throw LatentError("latent dimension " + std::to_string(z.dim()) + " does not match model dimension " +
                      std::to_string(model.config().latent_dim));
  }
  const Tensor w = model.map_batch(latent_to_tensor(z));
  return {Space::w, {w.values().begin(), w.values().end()}};
}

UVTextureMap synthesize(const GeneratorModel& model, const LatentVector& w) {
  if (w.space != Space::w) throw LatentError("synthesize expects a W-space vector");
  if (w.dim() != static_cast<std::size_t>(model.config().latent_dim)) {
    throw LatentError("latent dimension " + std::to_string(w.dim()) + " does not match model dimension " +
                      std::to_string(model.config().latent_dim));
  }
  return tensor_to_texture(model.synthesize_batch(latent_to_tensor(w)), 0);
}

LatentVector sample_mean_w(const GeneratorModel& model, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_mean_w needs n >= 1");
  const int d = model.config().latent_dim;
  std::vector<double> sum(d, 0.0);
  constexpr std::size_t chunk = 1000;
  for (std::size_t first = 0; first < n; first += chunk) {
    const std::size_t count = std::min(chunk, n - first);
    const Tensor w = model.map_batch(sample_z_batch(d, seed, first, count));
    for (std::size_t i = 0; i < count; ++i) {
      for (int k = 0; k < d; ++k) sum[k] += w[i * d + k];
    }
  }
  for (double& v : sum) v /= static_cast<double>(n);
  return {Space::w, std::move(sum)};
}

double w_spread(const GeneratorModel& model, std::size_t n, std::uint64_t seed) {
  const int d = model.config().latent_dim;
  const Tensor w = model.map_batch(sample_z_batch(d, seed, 0, n));
  double total = 0.0;
  for (int k = 0; k < d; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += w[i * d + k];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (w[i * d + k] - mean) * (w[i * d + k] - mean);
    total += std::sqrt(var / static_cast<double>(n - 1));
  }
  return total / d;
}

UVTextureMap tensor_to_texture(const Tensor& images, std::size_t index) {
  const std::size_t h = images.dim(2), w = images.dim(3), hw = h * w;
  const double* base = images.data() + index * 3 * hw;
  UVTextureMap out(static_cast<int>(w), static_cast<int>(h));
  auto ch = out.channels();
  for (std::size_t p = 0; p < hw; ++p) {
    for (int c = 0; c < 3; ++c) ch[3 * p + c] = std::clamp(base[c * hw + p], 0.0, 1.0);
  }
  return out;
}

Tensor textures_to_tensor(std::span<const UVTextureMap> textures) {
  if (textures.empty()) throw std::invalid_argument("no textures");
  const std::size_t h = textures[0].height(), w = textures[0].width(), hw = h * w;
  Tensor out({textures.size(), 3, h, w});
  for (std::size_t i = 0; i < textures.size(); ++i) {
    if (static_cast<std::size_t>(textures[i].width()) != w || static_cast<std::size_t>(textures[i].height()) != h) {
      throw std::invalid_argument("textures differ in size");
    }
    auto ch = textures[i].channels();
    double* base = out.data() + i * 3 * hw;
    for (std::size_t p = 0; p < hw; ++p) {
      for (int c = 0; c < 3; ++c) base[c * hw + p] = ch[3 * p + c];
    }
  }
  return out;
}

}  // namespace semuv::gen
