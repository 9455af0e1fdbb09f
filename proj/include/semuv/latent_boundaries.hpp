#pragma once

#include "semuv/generator.hpp"
#include "semuv/synthetic_faces.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace semuv::boundaries {

class BoundaryError : public std::runtime_error {
 public:
  enum class Kind { too_few_samples, degenerate_labels, empty_class, non_finite, rank_deficient, unknown_attribute,
                    bad_request, malformed_file };
  BoundaryError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct LabeledLatent {
  gen::LatentVector w;
  faces::FaceAttributes attributes;
};

struct ExtremeSets {
  std::vector<gen::LatentVector> positives;
  std::vector<gen::LatentVector> negatives;
};

// Top and bottom ceil(q * N) samples by attribute value. Ties keep input order.
ExtremeSets select_extremes(std::span<const LabeledLatent> samples, faces::Attribute attribute, double q = 0.1);

// Hyperplane <normal, w> + offset = 0 with a unit normal pointing towards
// larger attribute values.
struct AttributeBoundary {
  std::string attribute;
  std::vector<double> normal;
  double offset = 0.0;
  double heldout_accuracy = 0.0;
  std::vector<double> midpoint;  // halfway between the class means; may be empty
  double sigma_w = 0.0;          // mean per-dimension W spread; 0 if unknown
  std::string trained_on;

  std::size_t dim() const { return normal.size(); }
  double score(const gen::LatentVector& w) const;

  nlohmann::json to_json() const;
  static AttributeBoundary from_json(const nlohmann::json& j);
};

struct SvmConfig {
  double lambda = 1e-3;
  int epochs = 200;
  double heldout_fraction = 0.2;
  std::uint64_t seed = 0;
};

// Linear SVM by Pegasos subgradient descent on centred data. Returns the
// suffix-averaged iterate normalized to unit length.
AttributeBoundary train_boundary(const std::vector<gen::LatentVector>& positives,
                                 const std::vector<gen::LatentVector>& negatives, const std::string& attribute,
                                 const SvmConfig& config = {});

// Gram-Schmidt in list order. Offsets are recomputed so each new hyperplane
// passes through the original midpoint.
std::vector<AttributeBoundary> orthogonalize(const std::vector<AttributeBoundary>& boundaries);

// w + alpha * n.
gen::LatentVector edit(const gen::LatentVector& w, const AttributeBoundary& boundary, double alpha);

struct EditRequest {
  gen::LatentVector base;
  std::string attribute;
  int steps = 5;
  double alpha_min = -3.0;
  double alpha_max = 3.0;
};

std::vector<double> alpha_schedule(int steps, double alpha_min, double alpha_max);
const AttributeBoundary& find_boundary(std::span<const AttributeBoundary> boundaries, const std::string& attribute);
std::vector<gen::LatentVector> interpolation_sequence(const EditRequest& request,
                                                      std::span<const AttributeBoundary> boundaries);

// Draw n latents from the model, map to W and label each synthesized texture
// with the attribute oracle. Sample i uses z seed derive_seed(seed, i).
std::vector<LabeledLatent> label_generated_latents(const gen::GeneratorModel& model, std::size_t n,
                                                   std::uint64_t seed);

// Mean per-dimension standard deviation of a latent set.
double latent_spread(std::span<const LabeledLatent> samples);

// JSON lines: {"w": [...], "age", "facial_hair", "gender"}.
void save_labeled_latents(std::span<const LabeledLatent> samples, const std::filesystem::path& path);
std::vector<LabeledLatent> load_labeled_latents(const std::filesystem::path& path);

// A boundary file holds one boundary object or an array of them.
void save_boundaries(const std::vector<AttributeBoundary>& boundaries, const std::filesystem::path& path);
std::vector<AttributeBoundary> load_boundaries(const std::filesystem::path& path);

}  // namespace semuv::boundaries
