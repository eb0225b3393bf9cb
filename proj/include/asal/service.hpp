#pragma once

#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "asal/experiment.hpp"
#include "asal/oracle.hpp"
#include "asal/pca.hpp"

namespace httplib {
class Server;
}

namespace asal {

/// Human annotation session: the active-learning loop runs in a background
/// thread and blocks in the oracle until every pending sample is labeled or
/// skipped through submit(). All state sits behind one mutex; submit() and
/// the JSON views never wait for training.
class AnnotationSession final : public Oracle {
 public:
  /// Runs the first seed of `config` on `data`. Metrics are appended to
  /// `metrics_path` when it is non-empty.
  AnnotationSession(ExperimentConfig config, Dataset data, std::filesystem::path metrics_path = {});
  ~AnnotationSession() override;

  void start();
  /// Cancels a waiting loop and joins the background thread.
  void stop();

  enum class SubmitStatus { kAccepted, kConflict, kMalformed };
  struct SubmitResult {
    SubmitStatus status = SubmitStatus::kAccepted;
    std::string message;
    std::size_t remaining = 0;
  };
  /// Body: {"<sample id>": class | "skip", ...}. Applied atomically: any
  /// unknown or already-labeled id rejects the whole request.
  SubmitResult submit(const nlohmann::json& labels);

  nlohmann::ordered_json session_json() const;
  nlohmann::ordered_json batch_json() const;
  nlohmann::ordered_json metrics_json() const;

  std::string state() const;
  std::size_t cycle() const;
  std::vector<CycleMetrics> metrics() const;
  /// Blocks until the loop is waiting for labels or finished.
  void wait_until_idle() const;

  std::vector<std::optional<int>> label_pool(const Pool& pool, std::span<const std::size_t> indices,
                                             std::size_t cycle) override;
  std::vector<std::optional<int>> label_synthetic(const Matrix& samples, std::size_t cycle) override;

 private:
  void run();
  void set_state(std::string_view s);

  ExperimentConfig config_;
  Dataset data_;
  std::filesystem::path metrics_path_;
  std::string id_;
  PcaModel display_;  // 2-D projection for the batch view

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::string state_ = "idle";
  std::string error_;
  std::size_t cycle_ = 0;
  std::size_t pending_cycle_ = 0;
  std::vector<std::size_t> pending_;                 // pool indices awaiting labels
  std::map<std::size_t, std::optional<int>> answers_;  // pool index -> label, nullopt = skip
  std::vector<CycleMetrics> metrics_;
  bool cancelled_ = false;
  std::thread worker_;
};

/// HTTP surface under /v1: GET /session, GET /batch, POST /labels, GET /metrics.
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationSession& session);
  ~AnnotationServer();

  /// Binds (port 0 picks a free port) and serves in a background thread.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  AnnotationSession& session_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace asal
