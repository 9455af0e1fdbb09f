#pragma once

#include "semuv/nn/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace semuv::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor first_moment;
  Tensor second_moment;
  double lr_scale = 1.0;  // per-parameter learning-rate multiplier
};

// Named parameters in insertion order, with gradients and Adam state.
class ParamStore {
 public:
  // Returns the index of the new parameter. Names must be unique.
  std::size_t add(std::string name, Tensor init, double lr_scale = 1.0);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }

  std::size_t parameter_count() const;
  std::int64_t step() const { return step_; }

  void zero_grad();
  // Total squared L2 norm of gradients.
  double grad_norm_squared() const;

  // Copy values only (shapes and names must match).
  void copy_values_from(const ParamStore& other);

 private:
  friend void adam_step(ParamStore&, double, double, double, double);
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
  std::int64_t step_ = 0;
};

// Bias-corrected Adam; zeroes gradients afterwards.
void adam_step(ParamStore& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Checkpoint file:
//   magic "SEMUVCKP" | u32 version | u32 count
//   per entry: u32 name_len | name | u8 dtype | u32 rank | u64 extents[rank] | raw little-endian data
// dtype 1 = float64 tensor, 2 = uint8 blob (rank 1). Blobs carry model metadata.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::map<std::string, std::string> blobs;
};

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const std::map<std::string, std::string>& blobs = {});
std::vector<std::uint8_t> serialize_checkpoint(const ParamStore& params,
                                               const std::map<std::string, std::string>& blobs = {});
Checkpoint read_checkpoint(const std::filesystem::path& path);
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);
// Loads values into an existing store; every stored tensor must match by name and shape.
void load_values(ParamStore& params, const Checkpoint& ckpt);

// Value and gradient of a scalar function at x; grad may be null.
using ScalarFunction = std::function<double(const Tensor& x, Tensor* grad)>;

// Max over components of |analytic - numeric| / max(|analytic|, |numeric|, 1e-7)
// using central differences with step eps.
double grad_check(const ScalarFunction& f, const Tensor& x, double eps = 1e-3);

}  // namespace semuv::nn
