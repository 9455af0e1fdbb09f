#pragma once

#include "semuv/generator.hpp"
#include "semuv/texture.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace semuv::proj {

struct ProjectionConfig {
  int steps = 500;
  double lr_scale = 0.1;  // initial learning rate in units of the W spread
  int levels = 3;
  std::uint64_t seed = 0;
  std::size_t mean_w_samples = 10000;
  std::optional<gen::LatentVector> init;  // overrides the mean-W start

  void validate() const;
};

struct ProjectionResult {
  gen::LatentVector w;
  double final_loss = 0.0;  // best loss over the run
  double psnr_db = 0.0;
  std::vector<double> loss_curve;
  int best_step = 0;
  UVTextureMap reconstruction;

  nlohmann::json to_json() const;
};

// Sum over pyramid levels of the mean squared error between both images
// downsampled by 2^level.
double reconstruction_loss(const UVTextureMap& candidate, const UVTextureMap& target, int levels);

// Peak signal-to-noise ratio for values in [0, 1]; +inf for identical images.
double psnr_db(const UVTextureMap& a, const UVTextureMap& b);

// Pyramid loss of synthesize(w) against a fixed target, with dL/dw.
class ReconstructionObjective {
 public:
  ReconstructionObjective(const gen::GeneratorModel& model, const UVTextureMap& target, int levels);
  double evaluate(const gen::LatentVector& w, std::vector<double>* grad) const;

 private:
  const gen::GeneratorModel& model_;
  int resolution_;
  std::vector<std::vector<double>> levels_;
  std::vector<int> sizes_;
};

// Adam on a single W vector with cosine learning-rate decay.
ProjectionResult project(const UVTextureMap& target, const gen::GeneratorModel& model, const ProjectionConfig& config);

}  // namespace semuv::proj
