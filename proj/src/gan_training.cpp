#include "semuv/gan_training.hpp"

#include "semuv/nn/ops.hpp"
#include "semuv/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace semuv::gan {

using nn::Tensor;

int DiscriminatorConfig::blocks() const {
  int blocks = 0;
  for (int r = resolution; r > 4; r /= 2) ++blocks;
  return blocks;
}

std::vector<int> DiscriminatorConfig::block_channels() const {
  if (!channels.empty()) return channels;
  std::vector<int> out;
  for (int b = 0; b < blocks(); ++b) {
    const int res = resolution >> b;
    out.push_back(res >= 64 ? 8 : res >= 32 ? 16 : 32);
  }
  return out;
}

nlohmann::json DiscriminatorConfig::to_json() const {
  return {{"resolution", resolution},
          {"channels", block_channels()},
          {"seed", seed},
          {"minibatch_stddev", minibatch_stddev}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const nlohmann::json& j) {
  DiscriminatorConfig c;
  c.resolution = j.value("resolution", c.resolution);
  c.channels = j.value("channels", std::vector<int>{});
  c.seed = j.value("seed", c.seed);
  c.minibatch_stddev = j.value("minibatch_stddev", c.minibatch_stddev);
  if (c.resolution < 8 || (c.resolution & (c.resolution - 1)) != 0) {
    throw std::invalid_argument("discriminator resolution must be a power of two >= 8");
  }
  if (!c.channels.empty() && static_cast<int>(c.channels.size()) != c.blocks()) {
    throw std::invalid_argument("discriminator channels must list one entry per block");
  }
  return c;
}

namespace {

constexpr double kStddevEps = 1e-8;

Tensor normal_tensor(nn::Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.normal() * stddev;
  return t;
}

}  // namespace

DiscriminatorModel::DiscriminatorModel(DiscriminatorConfig config) : config_(std::move(config)) {
  Rng rng(derive_seed(config_.seed, 0xd15c));
  std::size_t in_c = 3;
  for (int c : config_.block_channels()) {
    const std::size_t out_c = c;
    const std::string prefix = "block" + std::to_string(conv_w_.size());
    conv_w_.push_back(params_.add(prefix + ".conv.weight",
                                  normal_tensor({out_c, in_c, 3, 3}, std::sqrt(2.0 / (9.0 * in_c)), rng)));
    conv_b_.push_back(params_.add(prefix + ".conv.bias", Tensor({out_c})));
    in_c = out_c;
  }
  const std::size_t flat = (in_c + (config_.minibatch_stddev ? 1 : 0)) * 16;
  out_w_ = params_.add("out.weight", normal_tensor({flat, 1}, std::sqrt(1.0 / flat), rng));
  out_b_ = params_.add("out.bias", Tensor({1}));
}

Tensor DiscriminatorModel::forward(const Tensor& images, DiscriminatorTape* tape) const {
  const std::size_t r = config_.resolution;
  nn::expect_shape(images, {images.dim(0), 3, r, r}, "discriminator input");
  Tensor x = images;
  for (double& v : x.values()) v = 2.0 * v - 1.0;
  if (tape) {
    tape->conv_in.clear();
    tape->conv_out.clear();
  }
  for (std::size_t b = 0; b < conv_w_.size(); ++b) {
    Tensor a = nn::conv3x3(x, params_[conv_w_[b]].value, params_[conv_b_[b]].value);
    Tensor next = nn::downsample2x_avg(nn::leaky_relu(a));
    if (tape) {
      tape->conv_in.push_back(std::move(x));
      tape->conv_out.push_back(std::move(a));
    }
    x = std::move(next);
  }
  const std::size_t n = x.dim(0);
  const std::size_t per = x.size() / n;
  Tensor flat;
  if (config_.minibatch_stddev) {
    Tensor sd({per});
    double mean_sd = 0.0;
    for (std::size_t k = 0; k < per; ++k) {
      double mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) mu += x[i * per + k];
      mu /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) var += (x[i * per + k] - mu) * (x[i * per + k] - mu);
      sd[k] = std::sqrt(var / static_cast<double>(n) + kStddevEps);
      mean_sd += sd[k];
    }
    mean_sd /= static_cast<double>(per);
    flat = Tensor({n, per + 16});
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(x.data() + i * per, x.data() + (i + 1) * per, flat.data() + i * (per + 16));
      std::fill(flat.data() + i * (per + 16) + per, flat.data() + (i + 1) * (per + 16), mean_sd);
    }
    if (tape) tape->stddev = std::move(sd);
  } else {
    flat = x.reshaped({n, per});
  }
  Tensor logits = nn::dense(flat, params_[out_w_].value, params_[out_b_].value);
  if (tape) {
    tape->features = std::move(x);
    tape->flat = std::move(flat);
  }
  return logits;
}

Tensor DiscriminatorModel::backward(const DiscriminatorTape& tape, const Tensor& dlogits, bool param_grads,
                                    bool need_input_grad) {
  auto grad = [&](std::size_t idx) { return param_grads ? &params_[idx].grad : nullptr; };
  const Tensor dflat = nn::dense_backward(tape.flat, params_[out_w_].value, dlogits, grad(out_w_), grad(out_b_));
  const Tensor& x = tape.features;
  const std::size_t n = x.dim(0), per = x.size() / n;
  Tensor g(x.shape());
  if (config_.minibatch_stddev) {
    double dmean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(dflat.data() + i * (per + 16), dflat.data() + i * (per + 16) + per, g.data() + i * per);
      for (std::size_t k = per; k < per + 16; ++k) dmean += dflat[i * (per + 16) + k];
    }
    // d sd_k / d x_ik = (x_ik - mu_k) / (n sd_k); the mean over k adds 1/per.
    for (std::size_t k = 0; k < per; ++k) {
      double mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) mu += x[i * per + k];
      mu /= static_cast<double>(n);
      const double c = dmean / (static_cast<double>(per) * static_cast<double>(n) * tape.stddev[k]);
      for (std::size_t i = 0; i < n; ++i) g[i * per + k] += c * (x[i * per + k] - mu);
    }
  } else {
    std::copy(dflat.data(), dflat.data() + dflat.size(), g.data());
  }
  for (std::size_t b = conv_w_.size(); b-- > 0;) {
    g = nn::downsample2x_avg_backward(g);
    g = nn::leaky_relu_backward(tape.conv_out[b], g);
    const bool need_dx = b > 0 || need_input_grad;
    g = nn::conv3x3_backward(tape.conv_in[b], params_[conv_w_[b]].value, g, grad(conv_w_[b]), grad(conv_b_[b]),
                             need_dx);
  }
  if (!need_input_grad) return {};
  g *= 2.0;  // input rescale x -> 2x - 1
  return g;
}

void DiscriminatorModel::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(path, params_, {{"discriminator_config", config_.to_json().dump()}});
}

DiscriminatorModel DiscriminatorModel::load(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path);
  auto it = ckpt.blobs.find("discriminator_config");
  if (it == ckpt.blobs.end()) throw std::runtime_error(path.string() + " is not a discriminator checkpoint");
  DiscriminatorModel model(DiscriminatorConfig::from_json(nlohmann::json::parse(it->second)));
  nn::load_values(model.params_, ckpt);
  return model;
}

GanLosses gan_losses(std::span<const double> real_logits, std::span<const double> fake_logits) {
  if (real_logits.empty() || fake_logits.empty()) throw std::invalid_argument("gan_losses: empty logits");
  GanLosses out;
  double real_term = 0.0, fake_term = 0.0, gen_term = 0.0;
  for (double r : real_logits) real_term += nn::softplus(-r);
  for (double f : fake_logits) {
    fake_term += nn::softplus(f);
    gen_term += nn::softplus(-f);
  }
  out.discriminator = real_term / real_logits.size() + fake_term / fake_logits.size();
  out.generator = gen_term / fake_logits.size();
  return out;
}

std::vector<AugmentParams> draw_augmentations(std::size_t count, int width, int height, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("augmentation probability must lie in [0, 1]");
  std::vector<AugmentParams> out(count);
  const int max_x = width / 8, max_y = height / 8;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    out[i].flip = rng.bernoulli(p);
    if (rng.bernoulli(p)) {
      out[i].shift_x = static_cast<int>(rng.below(2 * max_x + 1)) - max_x;
      out[i].shift_y = static_cast<int>(rng.below(2 * max_y + 1)) - max_y;
    }
  }
  return out;
}

namespace {

// Source pixel of output (x, y) under one augmentation.
inline std::size_t source_index(const AugmentParams& a, int x, int y, int w, int h) {
  const int sx = std::clamp(x - a.shift_x, 0, w - 1);
  const int sy = std::clamp(y - a.shift_y, 0, h - 1);
  const int fx = a.flip ? w - 1 - sx : sx;
  return static_cast<std::size_t>(sy) * w + fx;
}

}  // namespace

Tensor apply_augmentations(const Tensor& batch, std::span<const AugmentParams> params) {
  const std::size_t n = batch.dim(0), c = batch.dim(1);
  const int h = static_cast<int>(batch.dim(2)), w = static_cast<int>(batch.dim(3));
  if (params.size() != n) throw std::invalid_argument("one augmentation per image required");
  Tensor out(batch.shape());
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < n; ++i) {
    const AugmentParams& a = params[i];
    if (!a.flip && a.shift_x == 0 && a.shift_y == 0) {
      std::copy(batch.data() + i * c * hw, batch.data() + (i + 1) * c * hw, out.data() + i * c * hw);
      continue;
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* src = batch.data() + (i * c + ch) * hw;
      double* dst = out.data() + (i * c + ch) * hw;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) dst[static_cast<std::size_t>(y) * w + x] = src[source_index(a, x, y, w, h)];
      }
    }
  }
  return out;
}

Tensor apply_augmentations_backward(const Tensor& dout, std::span<const AugmentParams> params) {
  const std::size_t n = dout.dim(0), c = dout.dim(1);
  const int h = static_cast<int>(dout.dim(2)), w = static_cast<int>(dout.dim(3));
  Tensor din(dout.shape());
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < n; ++i) {
    const AugmentParams& a = params[i];
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* g = dout.data() + (i * c + ch) * hw;
      double* dst = din.data() + (i * c + ch) * hw;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) dst[source_index(a, x, y, w, h)] += g[static_cast<std::size_t>(y) * w + x];
      }
    }
  }
  return din;
}

Tensor augment(const Tensor& batch, double p, std::uint64_t seed) {
  const auto params = draw_augmentations(batch.dim(0), static_cast<int>(batch.dim(3)),
                                         static_cast<int>(batch.dim(2)), p, seed);
  return apply_augmentations(batch, params);
}

double ada_update(double p, int sign_of_overfit, double speed) {
  return std::clamp(p + sign_of_overfit * speed, 0.0, 1.0);
}

void TrainingConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (images_per_epoch < 1 || batch_size < 1 || checkpoint_every < 1 || eval_samples < 2 || ada_interval < 1) {
    throw std::invalid_argument("training sizes and cadences must be positive");
  }
  if (!(lr_g > 0.0 && lr_d > 0.0 && ada_speed >= 0.0 && r1_gamma >= 0.0 && ema_halflife_images >= 0.0)) {
    throw std::invalid_argument("learning rates must be positive; ADA speed, R1 weight and EMA half-life non-negative");
  }
  if (generator.resolution != discriminator.resolution) {
    throw std::invalid_argument("generator and discriminator resolutions differ");
  }
  generator.validate();
}

nlohmann::json TrainingConfig::to_json() const {
  return {{"epochs", epochs},
          {"images_per_epoch", images_per_epoch},
          {"batch_size", batch_size},
          {"lr_g", lr_g},
          {"lr_d", lr_d},
          {"beta1", beta1},
          {"beta2", beta2},
          {"ada_target", ada_target},
          {"ada_speed", ada_speed},
          {"ada_interval", ada_interval},
          {"r1_gamma", r1_gamma},
          {"checkpoint_every", checkpoint_every},
          {"eval_samples", eval_samples},
          {"ema_halflife_images", ema_halflife_images},
          {"seed", seed},
          {"generator", generator.to_json()},
          {"discriminator", discriminator.to_json()}};
}

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.images_per_epoch = j.value("images_per_epoch", c.images_per_epoch);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_g = j.value("lr_g", c.lr_g);
  c.lr_d = j.value("lr_d", c.lr_d);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.ada_target = j.value("ada_target", c.ada_target);
  c.ada_speed = j.value("ada_speed", c.ada_speed);
  c.ada_interval = j.value("ada_interval", c.ada_interval);
  c.r1_gamma = j.value("r1_gamma", c.r1_gamma);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.eval_samples = j.value("eval_samples", c.eval_samples);
  c.ema_halflife_images = j.value("ema_halflife_images", c.ema_halflife_images);
  c.seed = j.value("seed", c.seed);
  if (j.contains("generator")) c.generator = gen::GeneratorConfig::from_json(j["generator"]);
  if (j.contains("discriminator")) {
    c.discriminator = DiscriminatorConfig::from_json(j["discriminator"]);
  } else {
    c.discriminator.resolution = c.generator.resolution;
  }
  c.validate();
  return c;
}

std::string TrainingReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,loss_g,loss_d,p,fid,kid\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.loss_g << ',' << r.loss_d << ',' << r.p << ',' << r.fid << ',' << r.kid << '\n';
  }
  return out.str();
}

void TrainingReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << to_csv();
}

EvalResult evaluate_generator(const gen::GeneratorModel& g, const std::vector<metrics::FeatureVector>& real,
                              const metrics::FeatureExtractor& fx, std::size_t samples, std::uint64_t seed) {
  std::vector<metrics::FeatureVector> fake;
  fake.reserve(samples);
  constexpr std::size_t chunk = 50;
  const int d = g.config().latent_dim;
  for (std::size_t first = 0; first < samples; first += chunk) {
    const std::size_t count = std::min(chunk, samples - first);
    const Tensor images = g.synthesize_batch(g.map_batch(gen::sample_z_batch(d, seed, first, count)));
    for (auto& f : fx.extract_batch(images)) fake.push_back(std::move(f));
  }
  return {metrics::fid(real, fake), metrics::kid(real, fake)};
}

double accumulate_r1_gradient(DiscriminatorModel& d, const Tensor& real, double gamma) {
  const std::size_t n = real.dim(0);
  DiscriminatorTape tape;
  d.forward(real, &tape);
  const Tensor grad_x = d.backward(tape, Tensor({n, 1}, 1.0), false, true);
  double sq = 0.0, max_abs = 0.0;
  for (double v : grad_x.values()) {
    sq += v * v;
    max_abs = std::max(max_abs, std::abs(v));
  }
  const double penalty = 0.5 * gamma * sq / static_cast<double>(n);
  if (max_abs == 0.0) return penalty;
  const double h = 1e-4 / max_abs;
  const double scale = gamma / (2.0 * h * static_cast<double>(n));
  for (int sign : {+1, -1}) {
    Tensor probe = real;
    for (std::size_t i = 0; i < probe.size(); ++i) probe[i] += sign * h * grad_x[i];
    DiscriminatorTape t;
    d.forward(probe, &t);
    d.backward(t, Tensor({n, 1}, sign * scale), true, false);
  }
  return penalty;
}

TrainingResult train(const std::vector<faces::LabeledTexture>& corpus, const TrainingConfig& config,
                     const TrainingHooks& hooks) {
  config.validate();
  nn::configure_blas();
  if (corpus.empty()) throw TrainingError("training corpus is empty");
  const int res = config.generator.resolution;
  for (const auto& item : corpus) {
    if (item.texture.width() != res || item.texture.height() != res) {
      throw TrainingError("corpus texture size " + std::to_string(item.texture.width()) + "x" +
                          std::to_string(item.texture.height()) + " does not match configured resolution " +
                          std::to_string(res));
    }
  }
  auto log = [&](const std::string& msg) {
    if (hooks.log) hooks.log(msg);
  };

  gen::GeneratorModel g(config.generator);
  DiscriminatorModel d(config.discriminator);
  // Evaluated and exported copy; equals g when EMA is disabled.
  gen::GeneratorModel g_ema(config.generator);
  const bool use_ema = config.ema_halflife_images > 0.0;
  const double ema_beta =
      use_ema ? std::pow(0.5, static_cast<double>(config.batch_size) / config.ema_halflife_images) : 0.0;

  std::vector<UVTextureMap> textures;
  textures.reserve(corpus.size());
  for (const auto& item : corpus) textures.push_back(item.texture);
  const Tensor real_all = gen::textures_to_tensor(textures);
  const std::size_t image_size = 3 * static_cast<std::size_t>(res) * res;

  const metrics::FeatureExtractor fx;
  const std::size_t eval_n = std::min<std::size_t>(config.eval_samples, textures.size());
  const std::vector<metrics::FeatureVector> real_features =
      fx.extract_all(std::span<const UVTextureMap>(textures).first(eval_n));
  const std::uint64_t eval_seed = derive_seed(config.seed, 0xe7a1);

  const std::size_t batch = config.batch_size;
  const int latent = config.generator.latent_dim;
  double p = 0.0;
  double loss_g_sum = 0.0, loss_d_sum = 0.0;
  std::size_t loss_count = 0;
  double sign_sum = 0.0;
  std::size_t sign_count = 0;
  std::uint64_t step = 0;

  TrainingReport report;
  auto checkpoint = [&](int epoch) {
    const EvalResult eval = evaluate_generator(g_ema, real_features, fx, config.eval_samples, eval_seed);
    ReportRow row{epoch, loss_count ? loss_g_sum / loss_count : 0.0, loss_count ? loss_d_sum / loss_count : 0.0, p,
                  eval.fid, eval.kid};
    report.rows.push_back(row);
    loss_g_sum = loss_d_sum = 0.0;
    loss_count = 0;
    if (!hooks.checkpoint_dir.empty()) {
      std::filesystem::create_directories(hooks.checkpoint_dir);
      char name[48];
      std::snprintf(name, sizeof name, "epoch%05d", epoch);
      g_ema.save(hooks.checkpoint_dir / (std::string("g_") + name + ".ckpt"));
      d.save(hooks.checkpoint_dir / (std::string("d_") + name + ".ckpt"));
    }
    std::ostringstream msg;
    msg << "epoch " << epoch << " loss_g " << row.loss_g << " loss_d " << row.loss_d << " p " << row.p << " fid "
        << row.fid << " kid " << row.kid;
    log(msg.str());
    if (hooks.on_checkpoint) hooks.on_checkpoint(row);
  };

  checkpoint(0);
  const std::size_t batches_per_epoch = (config.images_per_epoch + batch - 1) / batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t b = 0; b < batches_per_epoch; ++b, ++step) {
      const std::uint64_t step_seed = derive_seed(config.seed, step);
      Rng rng(step_seed);
      Tensor real({batch, 3, static_cast<std::size_t>(res), static_cast<std::size_t>(res)});
      for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t pick = rng.below(textures.size());
        std::copy(real_all.data() + pick * image_size, real_all.data() + (pick + 1) * image_size,
                  real.data() + i * image_size);
      }
      const Tensor z = gen::sample_z_batch(latent, derive_seed(step_seed, 1), 0, batch);

      gen::MappingTape map_tape;
      gen::SynthesisTape synth_tape;
      const Tensor w = g.map_forward(z, &map_tape);
      const Tensor fake = g.synthesize_forward(w, &synth_tape);

      const auto aug_real = draw_augmentations(batch, res, res, p, derive_seed(step_seed, 2));
      const auto aug_fake = draw_augmentations(batch, res, res, p, derive_seed(step_seed, 3));
      const Tensor real_aug = apply_augmentations(real, aug_real);
      const Tensor fake_aug = apply_augmentations(fake, aug_fake);

      // Discriminator step.
      DiscriminatorTape real_tape, fake_tape;
      const Tensor real_logits = d.forward(real_aug, &real_tape);
      const Tensor fake_logits = d.forward(fake_aug, &fake_tape);
      const GanLosses losses = gan_losses(real_logits.values(), fake_logits.values());
      if (!std::isfinite(losses.discriminator) || !std::isfinite(losses.generator)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
      }
      Tensor d_real({batch, 1}), d_fake({batch, 1});
      for (std::size_t i = 0; i < batch; ++i) {
        d_real[i] = -nn::sigmoid(-real_logits[i]) / batch;
        d_fake[i] = nn::sigmoid(fake_logits[i]) / batch;
        sign_sum += real_logits[i] > 0.0 ? 1.0 : (real_logits[i] < 0.0 ? -1.0 : 0.0);
      }
      sign_count += batch;
      d.backward(real_tape, d_real, true, false);
      d.backward(fake_tape, d_fake, true, false);
      if (config.r1_gamma > 0.0) accumulate_r1_gradient(d, real_aug, config.r1_gamma);
      nn::adam_step(d.params(), config.lr_d, config.beta1, config.beta2);

      // Generator step against the updated discriminator; G is unchanged
      // since the forward pass above, so its tapes are reused.
      DiscriminatorTape gen_tape;
      const Tensor gen_logits = d.forward(fake_aug, &gen_tape);
      Tensor d_gen({batch, 1});
      double loss_g = 0.0;
      for (std::size_t i = 0; i < batch; ++i) {
        d_gen[i] = -nn::sigmoid(-gen_logits[i]) / batch;
        loss_g += nn::softplus(-gen_logits[i]);
      }
      loss_g /= batch;
      if (!std::isfinite(loss_g)) {
        throw TrainingError("non-finite generator loss at epoch " + std::to_string(epoch));
      }
      Tensor dimage = d.backward(gen_tape, d_gen, false, true);
      dimage = apply_augmentations_backward(dimage, aug_fake);
      const Tensor dw = g.synthesize_backward(synth_tape, dimage, true);
      g.map_backward(map_tape, dw, true);
      nn::adam_step(g.params(), config.lr_g, config.beta1, config.beta2);
      auto& avg = g_ema.params().params();
      const auto& cur = g.params().params();
      for (std::size_t k = 0; k < avg.size(); ++k) {
        double* a = avg[k].value.data();
        const double* c = cur[k].value.data();
        for (std::size_t i = 0; i < avg[k].value.size(); ++i) a[i] = ema_beta * a[i] + (1.0 - ema_beta) * c[i];
      }

      loss_g_sum += loss_g;
      loss_d_sum += losses.discriminator;
      ++loss_count;

      if ((step + 1) % config.ada_interval == 0) {
        const double r_t = sign_sum / static_cast<double>(sign_count);
        p = ada_update(p, r_t > config.ada_target ? +1 : -1, config.ada_speed);
        sign_sum = 0.0;
        sign_count = 0;
      }
    }
    if (epoch % config.checkpoint_every == 0 || epoch == config.epochs) checkpoint(epoch);
  }
  return {std::move(g_ema), std::move(d), std::move(report)};
}

}  // namespace semuv::gan
