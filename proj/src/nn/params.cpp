#include "semuv/nn/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace semuv::nn {

std::size_t ParamStore::add(std::string name, Tensor init, double lr_scale) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  Parameter p;
  p.grad = Tensor(init.shape());
  p.first_moment = Tensor(init.shape());
  p.second_moment = Tensor(init.shape());
  p.value = std::move(init);
  p.name = name;
  p.lr_scale = lr_scale;
  index_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

double ParamStore::grad_norm_squared() const {
  double s = 0.0;
  for (const auto& p : params_) {
    for (double g : p.grad.values()) s += g * g;
  }
  return s;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.size() != size()) throw std::invalid_argument("parameter stores differ in size");
  for (std::size_t i = 0; i < size(); ++i) {
    expect_shape(other[i].value, params_[i].value.shape(), params_[i].name);
    params_[i].value = other[i].value;
  }
}

void adam_step(ParamStore& store, double lr, double beta1, double beta2, double eps) {
  ++store.step_;
  const double t = static_cast<double>(store.step_);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (auto& p : store.params_) {
    const double step = lr * p.lr_scale;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      double& m = p.first_moment[i];
      double& v = p.second_moment[i];
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g * g;
      p.value[i] -= step * (m / c1) / (std::sqrt(v / c2) + eps);
    }
    check_finite(p.value, "adam_step(" + p.name + ")");
    p.grad.fill(0.0);
  }
}

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'U', 'V', 'C', 'K', 'P'};
constexpr std::uint8_t kDtypeF64 = 1;
constexpr std::uint8_t kDtypeBlob = 2;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

void put_bytes(std::vector<std::uint8_t>& out, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  out.insert(out.end(), p, p + n);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    T v;
    read(&v, sizeof(T));
    return v;
  }
  void read(void* dst, std::size_t n) {
    if (n > bytes_.size() - pos_) throw std::runtime_error("checkpoint truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ParamStore& params,
                                               const std::map<std::string, std::string>& blobs) {
  std::vector<std::uint8_t> out;
  put_bytes(out, kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size() + blobs.size()));
  for (const auto& [name, blob] : blobs) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    put_bytes(out, name.data(), name.size());
    put<std::uint8_t>(out, kDtypeBlob);
    put<std::uint32_t>(out, 1);
    put<std::uint64_t>(out, blob.size());
    put_bytes(out, blob.data(), blob.size());
  }
  for (const auto& p : params.params()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    put_bytes(out, p.name.data(), p.name.size());
    put<std::uint8_t>(out, kDtypeF64);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put<std::uint64_t>(out, d);
    put_bytes(out, p.value.data(), p.value.size() * sizeof(double));
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const std::map<std::string, std::string>& blobs) {
  const auto bytes = serialize_checkpoint(params, blobs);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for checkpoint " + path.string());
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error("not a checkpoint file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  Checkpoint ckpt;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name(name_len, '\0');
    r.read(name.data(), name_len);
    const auto dtype = r.get<std::uint8_t>();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw std::runtime_error("checkpoint entry " + name + " has implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    const std::size_t n = element_count(shape);
    if (dtype == kDtypeBlob) {
      std::string blob(n, '\0');
      r.read(blob.data(), n);
      ckpt.blobs.emplace(std::move(name), std::move(blob));
    } else if (dtype == kDtypeF64) {
      std::vector<double> data(n);
      r.read(data.data(), n * sizeof(double));
      ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    } else {
      throw std::runtime_error("checkpoint entry " + name + " has unsupported dtype " + std::to_string(dtype));
    }
  }
  if (!r.done()) throw std::runtime_error("trailing bytes after checkpoint entries");
  return ckpt;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_checkpoint(bytes);
}

void load_values(ParamStore& params, const Checkpoint& ckpt) {
  if (ckpt.tensors.size() != params.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                             std::to_string(params.size()));
  }
  for (const auto& [name, tensor] : ckpt.tensors) {
    if (!params.contains(name)) throw std::runtime_error("checkpoint tensor " + name + " unknown to model");
    auto& p = params[params.index_of(name)];
    expect_shape(tensor, p.value.shape(), "checkpoint tensor " + name);
    p.value = tensor;
  }
}

double grad_check(const ScalarFunction& f, const Tensor& x, double eps) {
  Tensor analytic(x.shape());
  f(x, &analytic);
  Tensor probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(probe, nullptr);
    probe[i] = x[i] - eps;
    const double down = f(probe, nullptr);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-7});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace semuv::nn
