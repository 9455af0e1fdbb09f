#pragma once

#include "semuv/generator.hpp"
#include "semuv/metrics.hpp"
#include "semuv/synthetic_faces.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace semuv::gan {

struct DiscriminatorConfig {
  int resolution = 64;
  std::vector<int> channels;  // per downsampling block, finest first; empty selects defaults
  std::uint64_t seed = 2;
  bool minibatch_stddev = true;  // extra 4x4 feature: mean batch standard deviation

  int blocks() const;
  std::vector<int> block_channels() const;
  nlohmann::json to_json() const;
  static DiscriminatorConfig from_json(const nlohmann::json& j);
};

struct DiscriminatorTape {
  std::vector<nn::Tensor> conv_in;
  std::vector<nn::Tensor> conv_out;
  nn::Tensor features;  // last block output [N,C,4,4]
  nn::Tensor stddev;    // per-position batch standard deviation [C*16]
  nn::Tensor flat;
};

// Per-resolution conv3x3 -> lrelu -> 2x average pool blocks down to 4x4,
// then a dense layer to one logit per image. Input is rescaled to [-1, 1].
class DiscriminatorModel {
 public:
  explicit DiscriminatorModel(DiscriminatorConfig config);

  const DiscriminatorConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // images [N,3,R,R] -> logits [N,1]
  nn::Tensor forward(const nn::Tensor& images, DiscriminatorTape* tape) const;
  // Returns dL/dimages when need_input_grad; accumulates parameter grads when requested.
  nn::Tensor backward(const DiscriminatorTape& tape, const nn::Tensor& dlogits, bool param_grads,
                      bool need_input_grad);

  void save(const std::filesystem::path& path) const;
  static DiscriminatorModel load(const std::filesystem::path& path);

 private:
  DiscriminatorConfig config_;
  nn::ParamStore params_;
  std::vector<std::size_t> conv_w_, conv_b_;
  std::size_t out_w_ = 0, out_b_ = 0;
};

struct GanLosses {
  double generator = 0.0;
  double discriminator = 0.0;
};

// Non-saturating logistic losses:
// loss_d = mean softplus(-real) + mean softplus(fake), loss_g = mean softplus(-fake).
GanLosses gan_losses(std::span<const double> real_logits, std::span<const double> fake_logits);

struct AugmentParams {
  bool flip = false;
  int shift_x = 0;
  int shift_y = 0;
};

// Per image: with probability p a horizontal flip, and with probability p an
// integer translation uniform in +-1/8 of the side (edge clamped).
std::vector<AugmentParams> draw_augmentations(std::size_t count, int width, int height, double p, std::uint64_t seed);
nn::Tensor apply_augmentations(const nn::Tensor& batch, std::span<const AugmentParams> params);
nn::Tensor apply_augmentations_backward(const nn::Tensor& dout, std::span<const AugmentParams> params);
nn::Tensor augment(const nn::Tensor& batch, double p, std::uint64_t seed);

// p' = clamp(p + sign * speed, 0, 1)
double ada_update(double p, int sign_of_overfit, double speed);

struct TrainingConfig {
  int epochs = 100;            // full scale: 3000
  int images_per_epoch = 2000; // full scale: 4000 images per epoch over 10000 maps
  int batch_size = 16;
  double lr_g = 0.002;
  double lr_d = 0.002;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double ada_target = 0.6;
  double ada_speed = 0.005;
  int ada_interval = 4;        // batches between controller updates
  double r1_gamma = 0.0;       // 0 disables R1
  int checkpoint_every = 10;   // epochs
  int eval_samples = 500;
  double ema_halflife_images = 2000.0;  // generator weight averaging; 0 disables
  std::uint64_t seed = 1;
  gen::GeneratorConfig generator;
  DiscriminatorConfig discriminator;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
};

struct ReportRow {
  int epoch = 0;
  double loss_g = 0.0;
  double loss_d = 0.0;
  double p = 0.0;
  double fid = 0.0;
  double kid = 0.0;
};

struct TrainingReport {
  std::vector<ReportRow> rows;

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainingResult {
  gen::GeneratorModel generator;  // weight-averaged when EMA is enabled
  DiscriminatorModel discriminator;
  TrainingReport report;
};

struct TrainingHooks {
  // Directory for per-checkpoint model files; empty disables writing.
  std::filesystem::path checkpoint_dir;
  std::function<void(const ReportRow&)> on_checkpoint;
  std::function<void(const std::string&)> log;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

TrainingResult train(const std::vector<faces::LabeledTexture>& corpus, const TrainingConfig& config,
                     const TrainingHooks& hooks = {});

// Surrogate FID/KID of generator samples against precomputed real features.
struct EvalResult {
  double fid = 0.0;
  double kid = 0.0;
};
EvalResult evaluate_generator(const gen::GeneratorModel& g, const std::vector<metrics::FeatureVector>& real,
                              const metrics::FeatureExtractor& fx, std::size_t samples, std::uint64_t seed);

// Gradient of the R1 penalty (gamma / 2) * mean ||grad_x D(x)||^2 with respect
// to the discriminator parameters, by a central finite-difference
// Hessian-vector product. Accumulates into the parameter gradients and
// returns the penalty value.
double accumulate_r1_gradient(DiscriminatorModel& d, const nn::Tensor& real, double gamma);

}  // namespace semuv::gan
