#include "semuv/edit_service.hpp"

#include "semuv/random.hpp"

#include <httplib.h>

#include <cstdio>
#include <cstdlib>

namespace semuv::service {

using nlohmann::json;

std::size_t threads_from_env() {
  if (const char* env = std::getenv("SEMUV_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PngReply make_png(const UVTextureMap& image) {
  const auto bytes = encode_png(image);
  PngReply reply{std::string(bytes.begin(), bytes.end()), {}};
  reply.etag = "\"" + hex64(fnv1a(reply.body)) + "\"";
  return reply;
}

template <typename Map>
void evict(Map& map, std::deque<std::string>& order, std::size_t limit) {
  while (order.size() > limit) {
    map.erase(order.front());
    order.pop_front();
  }
}

}  // namespace

EditService::EditService(ServiceConfig config, render::HeadMesh mesh)
    : config_(std::move(config)), mesh_(std::move(mesh)) {
  config_.projection.validate();
  mesh_.validate();
  if (config_.render_size < 8 || config_.render_size > 2048) throw std::invalid_argument("render size out of range");
  for (std::size_t i = 0; i < std::max<std::size_t>(1, config_.workers); ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

EditService::~EditService() {
  {
    std::lock_guard lock(jobs_mutex_);
    stopping_ = true;
  }
  jobs_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

void EditService::add_model(const std::string& id, std::shared_ptr<const gen::GeneratorModel> model) {
  sigma_w_[id] = gen::w_spread(*model);
  models_[id] = std::move(model);
}

void EditService::add_boundaries(const std::string& id, std::vector<boundaries::AttributeBoundary> set) {
  if (set.empty()) throw std::invalid_argument("boundary set '" + id + "' is empty");
  boundary_sets_[id] = std::move(set);
}

json EditService::describe() const {
  json models = json::array();
  for (const auto& [id, m] : models_) {
    models.push_back({{"model_id", id},
                      {"resolution", m->config().resolution},
                      {"latent_dim", m->config().latent_dim},
                      {"sigma_w", sigma_w_.at(id)}});
  }
  json sets = json::array();
  for (const auto& [id, set] : boundary_sets_) {
    json attrs = json::array();
    for (const auto& b : set) {
      json a = {{"attribute", b.attribute}, {"heldout_accuracy", b.heldout_accuracy}};
      if (b.sigma_w > 0.0) a["alpha_range"] = {-3.0 * b.sigma_w, 3.0 * b.sigma_w};
      attrs.push_back(std::move(a));
    }
    sets.push_back({{"boundaries_id", id}, {"dim", set.front().dim()}, {"attributes", attrs}});
  }
  return {{"models", models}, {"boundaries", sets}, {"views", {"front", "left", "right"}}};
}

const gen::GeneratorModel& EditService::model(const std::string& id) const {
  auto it = models_.find(id);
  if (it == models_.end()) throw ServiceError(404, "unknown model_id '" + id + "'");
  return *it->second;
}

const std::vector<boundaries::AttributeBoundary>& EditService::boundary_set(const std::string& id) const {
  auto it = boundary_sets_.find(id);
  if (it == boundary_sets_.end()) throw ServiceError(404, "unknown boundaries_id '" + id + "'");
  return it->second;
}

std::shared_ptr<EditService::Session> EditService::find_session(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
  return it->second;
}

std::string EditService::cache_texture(UVTextureMap texture) {
  std::string ref = content_hash(texture);
  std::lock_guard lock(cache_mutex_);
  if (textures_.emplace(ref, std::move(texture)).second) {
    texture_order_.push_back(ref);
    evict(textures_, texture_order_, config_.cache_limit);
  }
  return ref;
}

UVTextureMap EditService::cached_texture(const std::string& ref) const {
  std::lock_guard lock(cache_mutex_);
  auto it = textures_.find(ref);
  if (it == textures_.end()) throw ServiceError(404, "unknown texture '" + ref + "'");
  return it->second;
}

json EditService::scores(const std::string& boundaries_id, const gen::LatentVector& w) const {
  json out = json::object();
  for (const auto& b : boundary_set(boundaries_id)) out[b.attribute] = b.score(w);
  return out;
}

std::shared_ptr<EditService::Session> EditService::open_session(const std::string& model_id,
                                                                const std::string& boundaries_id,
                                                                gen::LatentVector base, json source) {
  const auto& m = model(model_id);
  const auto& set = boundary_set(boundaries_id);
  if (set.front().dim() != base.dim()) {
    throw ServiceError(400, "boundaries '" + boundaries_id + "' do not match the latent dimension of '" + model_id + "'");
  }
  auto s = std::make_shared<Session>();
  s->model_id = model_id;
  s->boundaries_id = boundaries_id;
  s->base_ref = cache_texture(gen::synthesize(m, base));
  s->base = std::move(base);
  s->source = std::move(source);
  std::lock_guard lock(sessions_mutex_);
  s->id = "s" + std::to_string(next_session_++);
  sessions_[s->id] = s;
  return s;
}

json EditService::create_random_session(const std::string& model_id, const std::string& boundaries_id,
                                        std::uint64_t seed) {
  const auto& m = model(model_id);
  boundary_set(boundaries_id);
  gen::LatentVector w = gen::map_latent(m, gen::sample_z(m.config().latent_dim, seed));
  auto s = open_session(model_id, boundaries_id, std::move(w), {{"type", "random"}, {"seed", seed}});
  return session(s->id);
}

json EditService::submit_upload(const std::string& model_id, const std::string& boundaries_id,
                                std::span<const std::uint8_t> image_bytes) {
  const auto& m = model(model_id);
  boundary_set(boundaries_id);
  UVTextureMap target;
  try {
    const bool png = image_bytes.size() >= 8 && image_bytes[0] == 0x89 && image_bytes[1] == 'P';
    target = png ? decode_png(image_bytes) : decode_ppm(image_bytes);
  } catch (const TextureError& e) {
    throw ServiceError(422, std::string("bad image: ") + e.what());
  }
  if (target.width() != target.height()) throw ServiceError(422, "bad image: texture must be square");
  const int res = m.config().resolution;
  if (target.width() != res) target = resize_bilinear(target, res, res);

  auto job = std::make_shared<Job>();
  {
    std::lock_guard lock(jobs_mutex_);
    job->id = "j" + std::to_string(next_job_++);
    jobs_[job->id] = job;
    queue_.push_back([this, job, model_id, boundaries_id, target = std::move(target)] {
      try {
        const proj::ProjectionResult r = proj::project(target, model(model_id), config_.projection);
        auto s = open_session(model_id, boundaries_id, r.w,
                              {{"type", "upload"}, {"psnr_db", r.psnr_db}, {"final_loss", r.final_loss}});
        json result = session(s->id);
        result["psnr_db"] = r.psnr_db;
        result["final_loss"] = r.final_loss;
        std::lock_guard lock(jobs_mutex_);
        job->status = "done";
        job->result = std::move(result);
      } catch (const std::exception& e) {
        std::lock_guard lock(jobs_mutex_);
        job->status = "failed";
        job->error = e.what();
      }
    });
  }
  jobs_cv_.notify_one();
  return {{"job_id", job->id}, {"status", "queued"}};
}

json EditService::job(const std::string& job_id) const {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw ServiceError(404, "unknown job '" + job_id + "'");
  json out = {{"job_id", job_id}, {"status", it->second->status}};
  if (it->second->status == "done") out["result"] = it->second->result;
  if (it->second->status == "failed") out["error"] = it->second->error;
  return out;
}

json EditService::session(const std::string& session_id) const {
  auto s = find_session(session_id);
  std::lock_guard lock(s->mutex);
  json out = {{"session_id", s->id},
              {"model_id", s->model_id},
              {"boundaries_id", s->boundaries_id},
              {"w", s->base.values},
              {"texture_ref", s->base_ref},
              {"source", s->source},
              {"scores", scores(s->boundaries_id, s->base)}};
  if (!s->last_edit.is_null()) out["last_edit"] = s->last_edit;
  return out;
}

json EditService::edit(const std::string& session_id, const std::string& attribute, double alpha) {
  auto s = find_session(session_id);
  if (!std::isfinite(alpha)) throw ServiceError(400, "alpha must be finite");
  const auto& set = boundary_set(s->boundaries_id);
  const boundaries::AttributeBoundary* b = nullptr;
  for (const auto& candidate : set) {
    if (candidate.attribute == attribute) b = &candidate;
  }
  if (!b) throw ServiceError(400, "unknown attribute '" + attribute + "'");
  std::lock_guard lock(s->mutex);
  const gen::LatentVector w = boundaries::edit(s->base, *b, alpha);
  const std::string ref = cache_texture(gen::synthesize(model(s->model_id), w));
  s->last_edit = {{"attribute", attribute}, {"alpha", alpha}, {"texture_ref", ref}};
  return {{"session_id", s->id}, {"attribute", attribute}, {"alpha", alpha},
          {"w", w.values},       {"texture_ref", ref},     {"scores", scores(s->boundaries_id, w)}};
}

json EditService::sequence(const std::string& session_id, const std::string& attribute, int steps, double alpha_min,
                           double alpha_max) {
  if (steps < 1 || steps > 64) throw ServiceError(400, "steps must lie in [1, 64]");
  if (!(alpha_min <= alpha_max)) throw ServiceError(400, "alpha_min exceeds alpha_max");
  json frames = json::array();
  for (double alpha : boundaries::alpha_schedule(steps, alpha_min, alpha_max)) {
    json e = edit(session_id, attribute, alpha);
    frames.push_back({{"alpha", alpha}, {"texture_ref", e["texture_ref"]}, {"scores", e["scores"]}});
  }
  return {{"session_id", session_id}, {"attribute", attribute}, {"frames", frames}};
}

PngReply EditService::render(const std::string& session_id, const std::string& view, const std::string& texture_ref,
                             int size) {
  auto s = find_session(session_id);
  const auto v = render::parse_view(view);
  if (!v) throw ServiceError(400, "view must be front, left or right");
  if (size == 0) size = config_.render_size;
  if (size < 8 || size > 2048) throw ServiceError(400, "size must lie in [8, 2048]");
  std::string ref = texture_ref;
  if (ref.empty()) {
    std::lock_guard lock(s->mutex);
    ref = s->base_ref;
  }
  const std::string key = ref + "/" + view + "/" + std::to_string(size);
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = renders_.find(key); it != renders_.end()) return it->second;
  }
  const UVTextureMap texture = cached_texture(ref);
  const auto camera = render::view_camera(mesh_, *v, size);
  PngReply reply = make_png(render::render(mesh_, texture, camera).image);
  std::lock_guard lock(cache_mutex_);
  if (renders_.emplace(key, reply).second) {
    render_order_.push_back(key);
    evict(renders_, render_order_, config_.cache_limit);
  }
  return reply;
}

PngReply EditService::texture_png(const std::string& texture_ref) const { return make_png(cached_texture(texture_ref)); }

void EditService::wait_idle() {
  std::unique_lock lock(jobs_mutex_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && active_ == 0; });
}

void EditService::worker_loop() {
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock lock(jobs_mutex_);
      jobs_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      task = std::move(queue_.front());
      queue_.pop_front();
      ++active_;
      for (auto& [id, j] : jobs_) {
        if (j->status == "queued") {
          j->status = "running";
          break;
        }
      }
    }
    task();
    {
      std::lock_guard lock(jobs_mutex_);
      --active_;
    }
    idle_cv_.notify_all();
  }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw ServiceError(400, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ServiceError(400, std::string("malformed JSON: ") + e.what());
  }
}

template <typename T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw ServiceError(400, std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ServiceError(400, std::string("field '") + name + "' has the wrong type");
  }
}

template <typename T>
T field_or(const json& j, const char* name, T fallback) {
  return j.contains(name) ? field<T>(j, name) : fallback;
}

// Wraps a handler so ServiceError and other exceptions become JSON errors.
httplib::Server::Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      send_json(res, e.status(), {{"error", e.what()}});
    } catch (const boundaries::BoundaryError& e) {
      send_json(res, 400, {{"error", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", e.what()}});
    }
  };
}

void send_png(const httplib::Request& req, httplib::Response& res, const PngReply& png) {
  res.set_header("ETag", png.etag);
  res.set_header("Cache-Control", "no-cache");
  if (req.has_header("If-None-Match") && req.get_header_value("If-None-Match") == png.etag) {
    res.status = 304;
    return;
  }
  res.status = 200;
  res.set_content(png.body, "image/png");
}

}  // namespace

void register_routes(httplib::Server& server, EditService& service, const std::filesystem::path& ui_dir) {
  server.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  }));
  server.Get("/models", guarded([&service](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, service.describe());
  }));

  server.Post("/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    if (req.is_multipart_form_data()) {
      auto text = [&](const char* key, const std::string& fallback) {
        return req.has_file(key) ? req.get_file_value(key).content : fallback;
      };
      const std::string source = text("source", "upload");
      if (source != "upload") throw ServiceError(400, "multipart requests must use source=upload");
      if (!req.has_file("image")) throw ServiceError(422, "bad image: missing 'image' part");
      const std::string& bytes = req.get_file_value("image").content;
      const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data());
      send_json(res, 202,
                service.submit_upload(text("model_id", "default"), text("boundaries_id", "default"),
                                      std::span<const std::uint8_t>(p, bytes.size())));
      return;
    }
    const json body = parse_body(req);
    const std::string source = field_or<std::string>(body, "source", "random");
    const std::string model_id = field_or<std::string>(body, "model_id", "default");
    const std::string boundaries_id = field_or<std::string>(body, "boundaries_id", "default");
    if (source == "random") {
      send_json(res, 201,
                service.create_random_session(model_id, boundaries_id, field_or<std::uint64_t>(body, "seed", 0)));
    } else if (source == "upload") {
      throw ServiceError(400, "upload sessions must be sent as multipart/form-data with an 'image' part");
    } else {
      throw ServiceError(400, "source must be 'random' or 'upload'");
    }
  }));

  server.Get(R"(/sessions/([A-Za-z0-9]+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, service.session(req.matches[1]));
  }));

  server.Post(R"(/sessions/([A-Za-z0-9]+)/edit)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                send_json(res, 200,
                          service.edit(req.matches[1], field<std::string>(body, "attribute"),
                                       field<double>(body, "alpha")));
              }));

  server.Post(R"(/sessions/([A-Za-z0-9]+)/sequence)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                send_json(res, 200,
                          service.sequence(req.matches[1], field<std::string>(body, "attribute"),
                                           field<int>(body, "steps"), field<double>(body, "alpha_min"),
                                           field<double>(body, "alpha_max")));
              }));

  server.Get(R"(/sessions/([A-Za-z0-9]+)/render)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               int size = 0;
               if (req.has_param("size")) {
                 try {
                   size = std::stoi(req.get_param_value("size"));
                 } catch (const std::exception&) {
                   throw ServiceError(400, "size must be an integer");
                 }
               }
               const std::string view = req.has_param("view") ? req.get_param_value("view") : "front";
               const std::string texture = req.has_param("texture") ? req.get_param_value("texture") : "";
               send_png(req, res, service.render(req.matches[1], view, texture, size));
             }));

  server.Get(R"(/jobs/([A-Za-z0-9]+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, service.job(req.matches[1]));
  }));

  server.Get(R"(/textures/([0-9a-f]+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    send_png(req, res, service.texture_png(req.matches[1]));
  }));

  if (!ui_dir.empty()) {
    if (!server.set_mount_point("/", ui_dir.string())) {
      throw std::runtime_error("cannot serve UI directory " + ui_dir.string());
    }
  }
}

}  // namespace semuv::service
