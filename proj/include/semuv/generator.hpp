#pragma once

#include "semuv/nn/params.hpp"
#include "semuv/nn/tensor.hpp"
#include "semuv/texture.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace semuv::gen {

enum class Space { z, w };

// A point in the input (Z, standard normal) or intermediate (W) latent space.
struct LatentVector {
  Space space = Space::w;
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  friend bool operator==(const LatentVector&, const LatentVector&) = default;
};

class LatentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GeneratorConfig {
  int latent_dim = 64;      // full-size models use 512
  int mapping_layers = 4;   // full-size models use 8
  int resolution = 64;      // full-size models use 1024
  std::vector<int> channels;  // feature maps per block, 4x4 first; empty selects defaults
  std::uint64_t seed = 1;
  double mapping_lr_scale = 0.01;

  int blocks() const;
  std::vector<int> block_channels() const;
  void validate() const;

  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

// Intermediates recorded by a forward pass for the matching backward pass.
struct MappingTape {
  std::vector<nn::Tensor> inputs;       // input of each dense layer
  std::vector<nn::Tensor> activations;  // pre-activation output of each dense layer
};

struct SynthesisTape {
  struct Layer {
    nn::Tensor conv_in;
    nn::Tensor conv_out;  // before leaky relu
    nn::Tensor norm_in;   // after leaky relu
    nn::Tensor style;     // [N, 2C]: scale then shift
  };
  nn::Tensor w;
  std::vector<Layer> layers;  // two per block
  nn::Tensor rgb_in;
  nn::Tensor image;           // final [N,3,R,R] output in [0,1]
};

// Style-based generator: mapping network Z -> W, then a learned 4x4 constant
// refined by blocks of (upsample) conv3x3 -> lrelu -> AdaIN, twice, and a
// 3x3 toRGB squashed to [0, 1] with (tanh + 1) / 2. No noise inputs.
class GeneratorModel {
 public:
  explicit GeneratorModel(GeneratorConfig config);

  const GeneratorConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Batched inference: z, w are [N, D]; images are [N, 3, R, R].
  nn::Tensor map_batch(const nn::Tensor& z) const;
  nn::Tensor synthesize_batch(const nn::Tensor& w) const;

  nn::Tensor map_forward(const nn::Tensor& z, MappingTape* tape) const;
  // Returns dL/dz; accumulates parameter gradients when requested.
  nn::Tensor map_backward(const MappingTape& tape, const nn::Tensor& dw, bool param_grads);

  nn::Tensor synthesize_forward(const nn::Tensor& w, SynthesisTape* tape) const;
  // Returns dL/dw; accumulates parameter gradients when requested.
  nn::Tensor synthesize_backward(const SynthesisTape& tape, const nn::Tensor& dimage, bool param_grads);
  // dL/dw only; touches no parameter state, so it is safe on a shared model.
  nn::Tensor synthesize_latent_grad(const SynthesisTape& tape, const nn::Tensor& dimage) const;

  void save(const std::filesystem::path& path) const;
  static GeneratorModel load(const std::filesystem::path& path);

 private:
  struct LayerParams {
    std::size_t conv_w, conv_b, style_w, style_b;
    std::size_t channels;
  };

  GeneratorConfig config_;
  nn::ParamStore params_;
  std::vector<std::size_t> mapping_w_, mapping_b_;
  std::size_t const_input_ = 0;
  std::vector<LayerParams> layers_;
  std::size_t rgb_w_ = 0, rgb_b_ = 0;
};

// Seeded standard-normal Z draw; the i-th draw of a stream uses derive_seed(seed, i).
LatentVector sample_z(int dim, std::uint64_t seed);
nn::Tensor sample_z_batch(int dim, std::uint64_t seed, std::size_t first, std::size_t count);

LatentVector map_latent(const GeneratorModel& model, const LatentVector& z);
UVTextureMap synthesize(const GeneratorModel& model, const LatentVector& w);

// Mean of map_latent over n seeded Z draws.
LatentVector sample_mean_w(const GeneratorModel& model, std::size_t n = 10000, std::uint64_t seed = 0);

// Mean over coordinates of the per-coordinate standard deviation of W.
double w_spread(const GeneratorModel& model, std::size_t n = 2000, std::uint64_t seed = 0);

// Conversions between planar image tensors and textures.
UVTextureMap tensor_to_texture(const nn::Tensor& images, std::size_t index);
nn::Tensor textures_to_tensor(std::span<const UVTextureMap> textures);
nn::Tensor latent_to_tensor(const LatentVector& v);

}  // namespace semuv::gen
