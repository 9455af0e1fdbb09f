#pragma once

#include "semuv/generator.hpp"
#include "semuv/latent_boundaries.hpp"
#include "semuv/mesh_render.hpp"
#include "semuv/projection.hpp"

#include <json.hpp>

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace semuv::service {

// Carries the HTTP status the error maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct ServiceConfig {
  int render_size = 256;
  std::size_t workers = 1;  // projection job pool
  proj::ProjectionConfig projection;
  std::size_t cache_limit = 4096;  // textures and rendered views kept in memory
};

// Worker count from SEMUV_THREADS, else the hardware concurrency.
std::size_t threads_from_env();

struct PngReply {
  std::string body;
  std::string etag;  // quoted
};

// State behind the HTTP routes. Registered models and boundary sets are
// immutable.
class EditService {
 public:
  explicit EditService(ServiceConfig config = {}, render::HeadMesh mesh = render::make_head_mesh());
  ~EditService();
  EditService(const EditService&) = delete;
  EditService& operator=(const EditService&) = delete;

  void add_model(const std::string& id, std::shared_ptr<const gen::GeneratorModel> model);
  void add_boundaries(const std::string& id, std::vector<boundaries::AttributeBoundary> set);

  nlohmann::json describe() const;

  nlohmann::json create_random_session(const std::string& model_id, const std::string& boundaries_id,
                                       std::uint64_t seed);
  // Decodes synchronously (422 on a bad image) and queues the projection.
  nlohmann::json submit_upload(const std::string& model_id, const std::string& boundaries_id,
                               std::span<const std::uint8_t> image_bytes);
  nlohmann::json job(const std::string& job_id) const;
  nlohmann::json session(const std::string& session_id) const;

  // Edits are absolute offsets from the session's base latent.
  nlohmann::json edit(const std::string& session_id, const std::string& attribute, double alpha);
  nlohmann::json sequence(const std::string& session_id, const std::string& attribute, int steps, double alpha_min,
                          double alpha_max);

  PngReply render(const std::string& session_id, const std::string& view, const std::string& texture_ref,
                  int size = 0);
  PngReply texture_png(const std::string& texture_ref) const;

  // Blocks until every queued job has finished.
  void wait_idle();

 private:
  struct Session {
    std::string id;
    std::string model_id;
    std::string boundaries_id;
    gen::LatentVector base;
    std::string base_ref;
    nlohmann::json source;
    nlohmann::json last_edit;
    mutable std::mutex mutex;
  };
  struct Job {
    std::string id;
    std::string status = "queued";
    nlohmann::json result;
    std::string error;
  };

  const gen::GeneratorModel& model(const std::string& id) const;
  const std::vector<boundaries::AttributeBoundary>& boundary_set(const std::string& id) const;
  std::shared_ptr<Session> find_session(const std::string& id) const;
  std::shared_ptr<Session> open_session(const std::string& model_id, const std::string& boundaries_id,
                                        gen::LatentVector base, nlohmann::json source);
  std::string cache_texture(UVTextureMap texture);
  UVTextureMap cached_texture(const std::string& ref) const;
  nlohmann::json scores(const std::string& boundaries_id, const gen::LatentVector& w) const;
  void worker_loop();

  ServiceConfig config_;
  render::HeadMesh mesh_;
  std::map<std::string, std::shared_ptr<const gen::GeneratorModel>> models_;
  std::map<std::string, std::vector<boundaries::AttributeBoundary>> boundary_sets_;
  std::map<std::string, double> sigma_w_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 1;

  mutable std::mutex cache_mutex_;
  std::map<std::string, UVTextureMap> textures_;
  std::deque<std::string> texture_order_;
  std::map<std::string, PngReply> renders_;
  std::deque<std::string> render_order_;

  mutable std::mutex jobs_mutex_;
  std::condition_variable jobs_cv_;
  std::condition_variable idle_cv_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::deque<std::function<void()>> queue_;
  std::size_t active_ = 0;
  std::uint64_t next_job_ = 1;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

// Registers the JSON/PNG routes and, when ui_dir is non-empty, serves it as
// static files at /.
void register_routes(httplib::Server& server, EditService& service, const std::filesystem::path& ui_dir = {});

}  // namespace semuv::service
