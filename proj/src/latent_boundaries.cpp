#include "semuv/latent_boundaries.hpp"

#include "semuv/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace semuv::boundaries {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void require_w(const gen::LatentVector& w, std::size_t dim, const char* what) {
  if (w.space != gen::Space::w) throw gen::LatentError(std::string(what) + ": latent is not in W space");
  if (w.dim() != dim) {
    throw gen::LatentError(std::string(what) + ": latent has dimension " + std::to_string(w.dim()) + ", expected " +
                           std::to_string(dim));
  }
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

}  // namespace

ExtremeSets select_extremes(std::span<const LabeledLatent> samples, faces::Attribute attribute, double q) {
  if (samples.size() < 10) {
    throw BoundaryError(BoundaryError::Kind::too_few_samples,
                        "select_extremes needs at least 10 samples, got " + std::to_string(samples.size()));
  }
  if (!(q > 0.0 && q <= 0.5)) throw std::invalid_argument("quantile must lie in (0, 0.5]");
  const std::size_t n = samples.size();
  auto value = [&](std::size_t i) { return faces::get(samples[i].attributes, attribute); };
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (std::all_of(order.begin(), order.end(), [&](std::size_t i) { return value(i) == value(0); })) {
    throw BoundaryError(BoundaryError::Kind::degenerate_labels,
                        "all " + faces::to_string(attribute) + " labels are equal");
  }
  const std::size_t k = std::min(n / 2, static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9)));
  ExtremeSets out;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) > value(b); });
  for (std::size_t i = 0; i < k; ++i) out.positives.push_back(samples[order[i]].w);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
  for (std::size_t i = 0; i < k; ++i) out.negatives.push_back(samples[order[i]].w);
  return out;
}

double AttributeBoundary::score(const gen::LatentVector& w) const {
  require_w(w, dim(), "score");
  return dot(normal, w.values) + offset;
}

nlohmann::json AttributeBoundary::to_json() const {
  nlohmann::json j = {{"attribute", attribute},         {"dim", dim()},
                      {"normal", normal},               {"offset", offset},
                      {"trained_on", trained_on},       {"heldout_accuracy", heldout_accuracy}};
  if (!midpoint.empty()) j["midpoint"] = midpoint;
  if (sigma_w > 0.0) j["sigma_w"] = sigma_w;
  return j;
}

AttributeBoundary AttributeBoundary::from_json(const nlohmann::json& j) {
  try {
    AttributeBoundary b;
    b.attribute = j.at("attribute").get<std::string>();
    b.normal = j.at("normal").get<std::vector<double>>();
    b.offset = j.at("offset").get<double>();
    b.trained_on = j.value("trained_on", std::string{});
    b.heldout_accuracy = j.value("heldout_accuracy", 0.0);
    b.midpoint = j.value("midpoint", std::vector<double>{});
    b.sigma_w = j.value("sigma_w", 0.0);
    if (j.contains("dim") && j["dim"].get<std::size_t>() != b.normal.size()) {
      throw BoundaryError(BoundaryError::Kind::malformed_file, "boundary '" + b.attribute + "': dim does not match normal");
    }
    if (!b.midpoint.empty() && b.midpoint.size() != b.normal.size()) {
      throw BoundaryError(BoundaryError::Kind::malformed_file, "boundary '" + b.attribute + "': midpoint size mismatch");
    }
    const double len = norm(b.normal);
    if (b.normal.empty() || !(std::abs(len - 1.0) < 1e-6)) {
      throw BoundaryError(BoundaryError::Kind::malformed_file, "boundary '" + b.attribute + "': normal is not unit length");
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw BoundaryError(BoundaryError::Kind::malformed_file, std::string("malformed boundary: ") + e.what());
  }
}

AttributeBoundary train_boundary(const std::vector<gen::LatentVector>& positives,
                                 const std::vector<gen::LatentVector>& negatives, const std::string& attribute,
                                 const SvmConfig& config) {
  if (positives.empty() || negatives.empty()) {
    throw BoundaryError(BoundaryError::Kind::empty_class, "train_boundary: " +
                                                              std::string(positives.empty() ? "positive" : "negative") +
                                                              " class is empty");
  }
  if (!(config.lambda > 0.0) || config.epochs < 1) throw std::invalid_argument("train_boundary: bad SVM config");
  const std::size_t dim = positives.front().dim();
  for (const auto& w : positives) require_w(w, dim, "train_boundary");
  for (const auto& w : negatives) require_w(w, dim, "train_boundary");

  // Held-out split per class.
  Rng rng(derive_seed(config.seed, 0x5e1));
  struct Sample {
    const std::vector<double>* x;
    double y;
  };
  std::vector<Sample> train, heldout;
  auto split = [&](const std::vector<gen::LatentVector>& set, double y) {
    const std::size_t n = set.size();
    const std::size_t h = n >= 5 ? static_cast<std::size_t>(std::floor(config.heldout_fraction * n)) : 0;
    const auto idx = shuffled(n, rng);
    for (std::size_t i = 0; i < n; ++i) (i < h ? heldout : train).push_back({&set[idx[i]].values, y});
  };
  split(positives, +1.0);
  split(negatives, -1.0);

  // Centre on the training mean; the bias is then an ordinary (regularized)
  // weight on a constant feature.
  std::vector<double> mean(dim, 0.0);
  for (const auto& s : train) {
    for (std::size_t i = 0; i < dim; ++i) mean[i] += (*s.x)[i];
  }
  for (double& m : mean) m /= static_cast<double>(train.size());

  std::vector<double> v(dim + 1, 0.0), avg(dim + 1, 0.0), x(dim + 1, 1.0);
  const std::size_t total = static_cast<std::size_t>(config.epochs) * train.size();
  const std::size_t average_from = total / 2;
  std::size_t t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t k : shuffled(train.size(), rng)) {
      ++t;
      const Sample& s = train[k];
      for (std::size_t i = 0; i < dim; ++i) x[i] = (*s.x)[i] - mean[i];
      const double eta = 1.0 / (config.lambda * static_cast<double>(t));
      const bool violated = s.y * dot(v, x) < 1.0;
      const double shrink = 1.0 - eta * config.lambda;
      for (std::size_t i = 0; i <= dim; ++i) v[i] = shrink * v[i] + (violated ? eta * s.y * x[i] : 0.0);
      if (t > average_from) {
        for (std::size_t i = 0; i <= dim; ++i) avg[i] += v[i];
      }
    }
  }
  const std::span<const double> weights(avg.data(), dim);
  const double len = norm(weights);
  if (!std::isfinite(len) || !std::isfinite(avg[dim])) {
    throw BoundaryError(BoundaryError::Kind::non_finite, "train_boundary: non-finite SVM parameters");
  }
  if (len == 0.0) throw BoundaryError(BoundaryError::Kind::degenerate_labels, "train_boundary: zero normal");

  AttributeBoundary b;
  b.attribute = attribute;
  b.normal.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) b.normal[i] = avg[i] / len;
  b.offset = (avg[dim] - dot(weights, mean)) / len;

  std::vector<double> pos_mean(dim, 0.0), neg_mean(dim, 0.0);
  for (const auto& w : positives) {
    for (std::size_t i = 0; i < dim; ++i) pos_mean[i] += w.values[i] / positives.size();
  }
  for (const auto& w : negatives) {
    for (std::size_t i = 0; i < dim; ++i) neg_mean[i] += w.values[i] / negatives.size();
  }
  b.midpoint.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) b.midpoint[i] = 0.5 * (pos_mean[i] + neg_mean[i]);

  // With no held-out samples the accuracy is measured on the training set.
  const auto& eval = heldout.empty() ? train : heldout;
  std::size_t correct = 0;
  for (const auto& s : eval) correct += (dot(b.normal, *s.x) + b.offset) * s.y > 0.0;
  b.heldout_accuracy = static_cast<double>(correct) / static_cast<double>(eval.size());
  return b;
}

std::vector<AttributeBoundary> orthogonalize(const std::vector<AttributeBoundary>& boundaries) {
  std::vector<AttributeBoundary> out;
  out.reserve(boundaries.size());
  for (const auto& b : boundaries) {
    if (!out.empty() && b.dim() != out.front().dim()) {
      throw BoundaryError(BoundaryError::Kind::bad_request, "orthogonalize: boundary '" + b.attribute +
                                                                "' has a different dimension");
    }
    AttributeBoundary o = b;
    const double input_len = norm(o.normal);
    for (const auto& prev : out) {
      const double c = dot(o.normal, prev.normal);
      for (std::size_t i = 0; i < o.dim(); ++i) o.normal[i] -= c * prev.normal[i];
    }
    // Re-project once more to mop up cancellation error.
    for (const auto& prev : out) {
      const double c = dot(o.normal, prev.normal);
      for (std::size_t i = 0; i < o.dim(); ++i) o.normal[i] -= c * prev.normal[i];
    }
    const double len = norm(o.normal);
    // sin of the angle between the input normal and the span of its predecessors.
    if (!(len > 1e-6 * input_len)) {
      std::string closest = out.empty() ? "itself" : out.front().attribute;
      double best = -1.0;
      for (const auto& prev : out) {
        const double c = std::abs(dot(b.normal, prev.normal));
        if (c > best) {
          best = c;
          closest = prev.attribute;
        }
      }
      throw BoundaryError(BoundaryError::Kind::rank_deficient,
                          "orthogonalize: boundary '" + b.attribute + "' is linearly dependent on '" + closest + "'");
    }
    for (double& v : o.normal) v /= len;
    std::vector<double> anchor = b.midpoint;
    if (anchor.empty()) {
      // A point on the original hyperplane.
      const double s = -b.offset / (input_len * input_len);
      anchor.resize(b.dim());
      for (std::size_t i = 0; i < b.dim(); ++i) anchor[i] = s * b.normal[i];
    }
    o.offset = -dot(o.normal, anchor);
    out.push_back(std::move(o));
  }
  return out;
}

gen::LatentVector edit(const gen::LatentVector& w, const AttributeBoundary& boundary, double alpha) {
  require_w(w, boundary.dim(), "edit");
  gen::LatentVector out = w;
  for (std::size_t i = 0; i < out.dim(); ++i) out.values[i] += alpha * boundary.normal[i];
  return out;
}

std::vector<double> alpha_schedule(int steps, double alpha_min, double alpha_max) {
  if (steps < 1) throw BoundaryError(BoundaryError::Kind::bad_request, "steps must be >= 1");
  if (!(alpha_min <= alpha_max)) throw BoundaryError(BoundaryError::Kind::bad_request, "alpha_min exceeds alpha_max");
  std::vector<double> alphas(steps, alpha_min);
  for (int i = 1; i < steps; ++i) alphas[i] = alpha_min + i * (alpha_max - alpha_min) / (steps - 1);
  return alphas;
}

const AttributeBoundary& find_boundary(std::span<const AttributeBoundary> boundaries, const std::string& attribute) {
  for (const auto& b : boundaries) {
    if (b.attribute == attribute) return b;
  }
  throw BoundaryError(BoundaryError::Kind::unknown_attribute, "no boundary for attribute '" + attribute + "'");
}

std::vector<gen::LatentVector> interpolation_sequence(const EditRequest& request,
                                                      std::span<const AttributeBoundary> boundaries) {
  const AttributeBoundary& b = find_boundary(boundaries, request.attribute);
  std::vector<gen::LatentVector> out;
  for (double alpha : alpha_schedule(request.steps, request.alpha_min, request.alpha_max)) {
    out.push_back(edit(request.base, b, alpha));
  }
  return out;
}

std::vector<LabeledLatent> label_generated_latents(const gen::GeneratorModel& model, std::size_t n,
                                                   std::uint64_t seed) {
  std::vector<LabeledLatent> out;
  out.reserve(n);
  const int d = model.config().latent_dim;
  constexpr std::size_t chunk = 64;
  for (std::size_t first = 0; first < n; first += chunk) {
    const std::size_t count = std::min(chunk, n - first);
    const nn::Tensor w = model.map_batch(gen::sample_z_batch(d, seed, first, count));
    const nn::Tensor images = model.synthesize_batch(w);
    for (std::size_t i = 0; i < count; ++i) {
      LabeledLatent s;
      s.w.space = gen::Space::w;
      s.w.values.assign(w.data() + i * d, w.data() + (i + 1) * d);
      s.attributes = faces::measure_attributes(gen::tensor_to_texture(images, i));
      out.push_back(std::move(s));
    }
  }
  return out;
}

double latent_spread(std::span<const LabeledLatent> samples) {
  if (samples.size() < 2) throw BoundaryError(BoundaryError::Kind::too_few_samples, "latent_spread needs >= 2 samples");
  const std::size_t d = samples.front().w.dim();
  double total = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s.w.values[k];
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (const auto& s : samples) var += (s.w.values[k] - mean) * (s.w.values[k] - mean);
    total += std::sqrt(var / static_cast<double>(samples.size() - 1));
  }
  return total / static_cast<double>(d);
}

void save_labeled_latents(std::span<const LabeledLatent> samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : samples) {
    out << nlohmann::json{{"w", s.w.values},
                          {"age", s.attributes.age},
                          {"facial_hair", s.attributes.facial_hair},
                          {"gender", s.attributes.gender}}
               .dump()
        << '\n';
  }
}

std::vector<LabeledLatent> load_labeled_latents(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw BoundaryError(BoundaryError::Kind::malformed_file, "cannot open latents file " + path.string());
  std::vector<LabeledLatent> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabeledLatent s;
      s.w.space = gen::Space::w;
      s.w.values = j.at("w").get<std::vector<double>>();
      s.attributes = {j.at("age").get<double>(), j.at("facial_hair").get<double>(), j.at("gender").get<double>()};
      if (!out.empty() && s.w.dim() != out.front().w.dim()) throw std::invalid_argument("dimension mismatch");
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw BoundaryError(BoundaryError::Kind::malformed_file,
                          path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_boundaries(const std::vector<AttributeBoundary>& boundaries, const std::filesystem::path& path) {
  nlohmann::json j;
  if (boundaries.size() == 1) {
    j = boundaries.front().to_json();
  } else {
    j = nlohmann::json::array();
    for (const auto& b : boundaries) j.push_back(b.to_json());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<AttributeBoundary> load_boundaries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw BoundaryError(BoundaryError::Kind::malformed_file, "cannot open boundary file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw BoundaryError(BoundaryError::Kind::malformed_file, path.string() + ": " + e.what());
  }
  std::vector<AttributeBoundary> out;
  if (j.is_array()) {
    for (const auto& item : j) out.push_back(AttributeBoundary::from_json(item));
  } else {
    out.push_back(AttributeBoundary::from_json(j));
  }
  return out;
}

}  // namespace semuv::boundaries
