#include "semuv/projection.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace semuv::proj {

using nn::Tensor;

void ProjectionConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("projection steps must be >= 1");
  if (levels < 1) throw std::invalid_argument("projection levels must be >= 1");
  if (!(lr_scale > 0.0)) throw std::invalid_argument("projection learning rate must be positive");
}

nlohmann::json ProjectionResult::to_json() const {
  return {{"w", w.values},
          {"final_loss", final_loss},
          {"psnr_db", std::isfinite(psnr_db) ? nlohmann::json(psnr_db) : nlohmann::json("inf")},
          {"best_step", best_step},
          {"steps", loss_curve.size()},
          {"loss_curve", loss_curve}};
}

namespace {

void check_same_size(const UVTextureMap& a, const UVTextureMap& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument("image sizes differ: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                                " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

int level_size(int size, int level) { return std::max(1, size >> level); }

// Planar [3, h, w] copy of a texture.
std::vector<double> planar(const UVTextureMap& t) {
  const std::size_t hw = static_cast<std::size_t>(t.width()) * t.height();
  std::vector<double> out(3 * hw);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < hw; ++i) out[c * hw + i] = t.channels()[3 * i + c];
  }
  return out;
}

struct Pyramid {
  std::vector<std::vector<double>> levels;
  std::vector<int> widths, heights;
};

Pyramid build_pyramid(std::span<const double> image, int w, int h, int levels) {
  Pyramid p;
  for (int l = 0; l < levels; ++l) {
    const int lw = level_size(w, l), lh = level_size(h, l);
    std::vector<double> level(3 * static_cast<std::size_t>(lw) * lh);
    resize_planar(image, 3, w, h, level, lw, lh);
    p.levels.push_back(std::move(level));
    p.widths.push_back(lw);
    p.heights.push_back(lh);
  }
  return p;
}

// Loss of a planar candidate against a target pyramid; optionally writes the
// gradient with respect to the candidate.
double pyramid_loss(std::span<const double> candidate, int w, int h, const Pyramid& target, std::span<double> grad) {
  double loss = 0.0;
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> level_grad;
  for (std::size_t l = 0; l < target.levels.size(); ++l) {
    const int lw = target.widths[l], lh = target.heights[l];
    std::vector<double> level(target.levels[l].size());
    resize_planar(candidate, 3, w, h, level, lw, lh);
    const double inv = 1.0 / static_cast<double>(level.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < level.size(); ++i) {
      const double d = level[i] - target.levels[l][i];
      sum += d * d;
      level[i] = 2.0 * d * inv;
    }
    loss += sum * inv;
    if (!grad.empty()) {
      level_grad.assign(grad.size(), 0.0);
      resize_planar_adjoint(level, 3, w, h, level_grad, lw, lh);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += level_grad[i];
    }
  }
  return loss;
}

}  // namespace

double reconstruction_loss(const UVTextureMap& candidate, const UVTextureMap& target, int levels) {
  check_same_size(candidate, target);
  if (levels < 1) throw std::invalid_argument("levels must be >= 1");
  const auto t = planar(target);
  const Pyramid pyramid = build_pyramid(t, target.width(), target.height(), levels);
  return pyramid_loss(planar(candidate), candidate.width(), candidate.height(), pyramid, {});
}

double psnr_db(const UVTextureMap& a, const UVTextureMap& b) {
  check_same_size(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.channels().size(); ++i) {
    const double d = a.channels()[i] - b.channels()[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.channels().size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

ReconstructionObjective::ReconstructionObjective(const gen::GeneratorModel& model, const UVTextureMap& target,
                                                 int levels)
    : model_(model), resolution_(model.config().resolution) {
  if (levels < 1) throw std::invalid_argument("levels must be >= 1");
  if (target.width() != resolution_ || target.height() != resolution_) {
    throw std::invalid_argument("target is " + std::to_string(target.width()) + "x" + std::to_string(target.height()) +
                                ", generator resolution is " + std::to_string(resolution_));
  }
  Pyramid p = build_pyramid(planar(target), resolution_, resolution_, levels);
  levels_ = std::move(p.levels);
  sizes_ = std::move(p.widths);
}

double ReconstructionObjective::evaluate(const gen::LatentVector& w, std::vector<double>* grad) const {
  const std::size_t dim = model_.config().latent_dim;
  if (w.space != gen::Space::w || w.dim() != dim) {
    throw gen::LatentError("objective needs a W latent of dimension " + std::to_string(dim));
  }
  Pyramid p{levels_, sizes_, sizes_};
  gen::SynthesisTape tape;
  const Tensor image = model_.synthesize_forward(gen::latent_to_tensor(w), grad ? &tape : nullptr);
  if (!grad) return pyramid_loss(image.values(), resolution_, resolution_, p, {});
  Tensor dimage(image.shape());
  const double loss = pyramid_loss(image.values(), resolution_, resolution_, p, dimage.values());
  const Tensor dw = model_.synthesize_latent_grad(tape, dimage);
  grad->assign(dw.data(), dw.data() + dim);
  return loss;
}

ProjectionResult project(const UVTextureMap& target, const gen::GeneratorModel& model, const ProjectionConfig& config) {
  config.validate();
  const int res = model.config().resolution;
  if (target.width() != res || target.height() != res) {
    throw std::invalid_argument("projection target is " + std::to_string(target.width()) + "x" +
                                std::to_string(target.height()) + ", generator resolution is " + std::to_string(res));
  }
  const std::size_t dim = model.config().latent_dim;
  gen::LatentVector w;
  if (config.init) {
    if (config.init->space != gen::Space::w || config.init->dim() != dim) {
      throw gen::LatentError("projection init must be a W latent of dimension " + std::to_string(dim));
    }
    w = *config.init;
  } else {
    w = gen::sample_mean_w(model, config.mean_w_samples, config.seed);
  }
  const double lr0 = config.lr_scale * gen::w_spread(model, 2000, config.seed);

  const ReconstructionObjective objective(model, target, config.levels);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> m(dim, 0.0), v(dim, 0.0), dw(dim);
  ProjectionResult result;
  result.final_loss = std::numeric_limits<double>::infinity();
  for (int t = 0; t < config.steps; ++t) {
    const bool last = t + 1 == config.steps;
    const double loss = objective.evaluate(w, last ? nullptr : &dw);
    if (!std::isfinite(loss)) throw nn::NumericError("projection loss became non-finite at step " + std::to_string(t));
    result.loss_curve.push_back(loss);
    if (loss < result.final_loss) {
      result.final_loss = loss;
      result.best_step = t;
      result.w = w;
    }
    if (last) break;
    const double lr = 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * (t + 1) / config.steps));
    const double c1 = 1.0 - std::pow(beta1, t + 1), c2 = 1.0 - std::pow(beta2, t + 1);
    for (std::size_t i = 0; i < dim; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * dw[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * dw[i] * dw[i];
      w.values[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
  result.reconstruction = gen::synthesize(model, result.w);
  result.psnr_db = psnr_db(result.reconstruction, target);
  return result;
}

}  // namespace semuv::proj
