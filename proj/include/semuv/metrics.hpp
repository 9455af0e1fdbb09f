#pragma once

#include "semuv/nn/tensor.hpp"
#include "semuv/texture.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace semuv::metrics {

using FeatureVector = std::vector<double>;

inline constexpr std::size_t kFeatureDim = 64;
inline constexpr const char* kDefaultExtractorSeed = "fx-v1";

// Frozen random-feature network: conv3x3(3->16) lrelu avgpool2,
// conv3x3(16->64) lrelu avgpool2, global average pool, random projection
// 64 -> 64. Weights are a pure function of the seed name.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(std::string seed_name = kDefaultExtractorSeed);

  const std::string& seed_name() const { return seed_name_; }

  // Throws std::invalid_argument for images smaller than 16 pixels per side.
  FeatureVector extract(const UVTextureMap& image) const;
  // images: [N,3,H,W] in [0,1]; returns one feature vector per image.
  std::vector<FeatureVector> extract_batch(const nn::Tensor& images) const;
  std::vector<FeatureVector> extract_all(std::span<const UVTextureMap> images) const;

 private:
  std::string seed_name_;
  nn::Tensor conv1_w_, conv1_b_, conv2_w_, conv2_b_, proj_w_, proj_b_;
};

struct Moments {
  std::vector<double> mean;
  std::vector<double> covariance;  // row-major dim x dim
  std::size_t dim = 0;
};

// Sample mean and unbiased (n - 1) covariance.
Moments moments(std::span<const FeatureVector> features);

struct FidResult {
  double value = 0.0;
  double min_eigenvalue = 0.0;  // of sqrt(SA) SB sqrt(SA) before clamping
  bool clamped_significantly = false;  // min eigenvalue < -1e-8 * max eigenvalue
};

// |muA - muB|^2 + Tr(SA + SB - 2 (SA SB)^(1/2)), with the square-root trace
// taken from the eigenvalues of SA^(1/2) SB SA^(1/2), negatives clamped to 0.
FidResult fid_from_moments(const Moments& a, const Moments& b);
double fid(std::span<const FeatureVector> a, std::span<const FeatureVector> b);

// Unbiased squared MMD with kernel k(x, y) = (<x, y> / F + 1)^3. May be
// slightly negative.
double kid(std::span<const FeatureVector> a, std::span<const FeatureVector> b);

// Cosine similarity of extracted features, in [-1, 1].
double identity_similarity(const UVTextureMap& a, const UVTextureMap& b, const FeatureExtractor& fx);

struct StatTestResult {
  std::uint64_t k = 0;
  std::uint64_t n = 0;
  double p_value = 1.0;
};

// P(X >= k) for X ~ Binomial(n, 1/2): the tail is summed exactly in integer
// arithmetic and divided by 2^n once.
StatTestResult binomial_test_one_sided(std::uint64_t k, std::uint64_t n);

// Fixed six-decimal rendering used for p-value tables ("0.000030").
std::string format_p_value(double p);

}  // namespace semuv::metrics
