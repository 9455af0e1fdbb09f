#include "semuv/metrics.hpp"

#include "semuv/generator.hpp"
#include "semuv/nn/ops.hpp"
#include "semuv/random.hpp"

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <stdexcept>

namespace semuv::metrics {

using nn::Tensor;

namespace {

Tensor seeded_normal(nn::Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.normal() * stddev;
  return t;
}

void check_dims(std::span<const FeatureVector> a, std::span<const FeatureVector> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("feature sets must be nonempty");
  const std::size_t d = a[0].size();
  for (const auto& v : a) {
    if (v.size() != d) throw std::invalid_argument("feature dimension mismatch within first set");
  }
  for (const auto& v : b) {
    if (v.size() != d) throw std::invalid_argument("feature dimension mismatch between sets");
  }
}

}  // namespace

FeatureExtractor::FeatureExtractor(std::string seed_name) : seed_name_(std::move(seed_name)) {
  Rng rng(fnv1a(seed_name_));
  conv1_w_ = seeded_normal({16, 3, 3, 3}, std::sqrt(2.0 / 27.0), rng);
  conv1_b_ = seeded_normal({16}, 0.1, rng);
  conv2_w_ = seeded_normal({kFeatureDim, 16, 3, 3}, std::sqrt(2.0 / 144.0), rng);
  conv2_b_ = seeded_normal({kFeatureDim}, 0.1, rng);
  proj_w_ = seeded_normal({kFeatureDim, kFeatureDim}, std::sqrt(1.0 / kFeatureDim), rng);
  proj_b_ = Tensor({kFeatureDim});
}

std::vector<FeatureVector> FeatureExtractor::extract_batch(const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != 3) throw std::invalid_argument("expected [N,3,H,W] images");
  if (images.dim(2) < 16 || images.dim(3) < 16) {
    throw std::invalid_argument("image too small for feature extraction (< 16)");
  }
  Tensor x = images;
  for (double& v : x.values()) v = 2.0 * v - 1.0;
  x = nn::leaky_relu(nn::conv3x3(x, conv1_w_, conv1_b_));
  x = nn::downsample2x_avg(x);
  x = nn::leaky_relu(nn::conv3x3(x, conv2_w_, conv2_b_));
  x = nn::downsample2x_avg(x);
  const Tensor pooled = nn::global_avg_pool(x);
  const Tensor f = nn::dense(pooled, proj_w_, proj_b_);
  std::vector<FeatureVector> out(images.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].assign(f.data() + i * kFeatureDim, f.data() + (i + 1) * kFeatureDim);
  }
  return out;
}

FeatureVector FeatureExtractor::extract(const UVTextureMap& image) const {
  const UVTextureMap one[] = {image};
  return extract_batch(gen::textures_to_tensor(one)).front();
}

std::vector<FeatureVector> FeatureExtractor::extract_all(std::span<const UVTextureMap> images) const {
  std::vector<FeatureVector> out;
  out.reserve(images.size());
  constexpr std::size_t chunk = 64;
  for (std::size_t first = 0; first < images.size(); first += chunk) {
    const auto part = images.subspan(first, std::min(chunk, images.size() - first));
    for (auto& f : extract_batch(gen::textures_to_tensor(part))) out.push_back(std::move(f));
  }
  return out;
}

Moments moments(std::span<const FeatureVector> features) {
  if (features.size() < 2) throw std::invalid_argument("moments need at least 2 samples");
  const std::size_t d = features[0].size();
  const std::size_t n = features.size();
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (features[i].size() != d) throw std::invalid_argument("feature dimension mismatch");
    for (std::size_t k = 0; k < d; ++k) x(i, k) = features[i][k];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Moments m;
  m.dim = d;
  m.mean.assign(mean.data(), mean.data() + d);
  m.covariance.resize(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) m.covariance[r * d + c] = cov(r, c);
  }
  return m;
}

FidResult fid_from_moments(const Moments& a, const Moments& b) {
  if (a.dim != b.dim) throw std::invalid_argument("fid: feature dimension mismatch");
  const auto d = static_cast<Eigen::Index>(a.dim);
  const Eigen::Map<const Eigen::VectorXd> mu_a(a.mean.data(), d), mu_b(b.mean.data(), d);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> sa(
      a.covariance.data(), d, d),
      sb(b.covariance.data(), d, d);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_a(Eigen::MatrixXd(sa), Eigen::ComputeEigenvectors);
  const Eigen::VectorXd root_vals = eig_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sqrt_a = eig_a.eigenvectors() * root_vals.asDiagonal() * eig_a.eigenvectors().transpose();
  Eigen::MatrixXd inner = sqrt_a * sb * sqrt_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_inner(inner, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd lambdas = eig_inner.eigenvalues();

  FidResult r;
  r.min_eigenvalue = lambdas.minCoeff();
  const double max_eig = lambdas.maxCoeff();
  r.clamped_significantly = r.min_eigenvalue < -1e-8 * std::max(max_eig, 0.0);
  if (r.clamped_significantly) {
    std::cerr << "warning: fid clamped eigenvalue " << r.min_eigenvalue << " (max " << max_eig << ")\n";
  }
  const double trace_sqrt = lambdas.cwiseMax(0.0).cwiseSqrt().sum();
  r.value = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * trace_sqrt;
  return r;
}

double fid(std::span<const FeatureVector> a, std::span<const FeatureVector> b) {
  check_dims(a, b);
  return fid_from_moments(moments(a), moments(b)).value;
}

double kid(std::span<const FeatureVector> a, std::span<const FeatureVector> b) {
  check_dims(a, b);
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("kid needs at least 2 samples per set");
  const double f = static_cast<double>(a[0].size());
  auto kernel = [f](const FeatureVector& x, const FeatureVector& y) {
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
    const double base = dot / f + 1.0;
    return base * base * base;
  };
  auto within = [&](std::span<const FeatureVector> s) {
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) sum += kernel(s[i], s[j]);
    }
    const double pairs = static_cast<double>(s.size()) * static_cast<double>(s.size() - 1);
    return 2.0 * sum / pairs;
  };
  double cross = 0.0;
  for (const auto& x : a) {
    for (const auto& y : b) cross += kernel(x, y);
  }
  cross /= static_cast<double>(a.size()) * static_cast<double>(b.size());
  return within(a) + within(b) - 2.0 * cross;
}

double identity_similarity(const UVTextureMap& a, const UVTextureMap& b, const FeatureExtractor& fx) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument("identity_similarity needs equal resolutions");
  }
  const FeatureVector fa = fx.extract(a), fb = fx.extract(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    dot += fa[i] * fb[i];
    na += fa[i] * fa[i];
    nb += fb[i] * fb[i];
  }
  if (na == 0.0 || nb == 0.0) throw std::domain_error("identity_similarity: zero-norm feature vector");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

StatTestResult binomial_test_one_sided(std::uint64_t k, std::uint64_t n) {
  if (k > n) throw std::invalid_argument("binomial test: successes exceed trials");
  using boost::multiprecision::cpp_int;
  using boost::multiprecision::cpp_rational;
  // C(n, i) built incrementally: C(n, i + 1) = C(n, i) * (n - i) / (i + 1).
  cpp_int coeff = 1;
  cpp_int tail = 0;
  for (std::uint64_t i = 0; i <= n; ++i) {
    if (i >= k) tail += coeff;
    coeff = coeff * (n - i) / (i + 1);
  }
  const cpp_int total = cpp_int(1) << n;
  const cpp_rational p(tail, total);
  return {k, n, p.convert_to<double>()};
}

std::string format_p_value(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", p);
  return buf;
}

}  // namespace semuv::metrics
