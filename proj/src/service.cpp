#include "asal/service.hpp"

#include <fstream>

#include <httplib.h>

#include "asal/error.hpp"
#include "asal/kernels.hpp"

namespace asal {

using nlohmann::json;
using nlohmann::ordered_json;

AnnotationSession::AnnotationSession(ExperimentConfig config, Dataset data,
                                     std::filesystem::path metrics_path)
    : config_(std::move(config)), data_(std::move(data)), metrics_path_(std::move(metrics_path)) {
  if (config_.oracle != ExperimentConfig::OracleKind::kHuman)
    throw ConfigError("oracle: the annotation service needs oracle = human");
  config_.validate();
  id_ = config_hash(config_) + "-" + std::to_string(config_.seeds.front());
  if (data_.pool.width() >= 2 && data_.pool.size() >= 2) display_ = fit_pca(data_.pool.samples(), 2);
}

AnnotationSession::~AnnotationSession() { stop(); }

void AnnotationSession::start() {
  std::lock_guard lock(mu_);
  if (worker_.joinable()) throw StateError("session already started");
  if (!metrics_path_.empty()) std::ofstream(metrics_path_, std::ios::trunc);
  state_ = "training";
  worker_ = std::thread([this] { run(); });
}

void AnnotationSession::stop() {
  {
    std::lock_guard lock(mu_);
    cancelled_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

void AnnotationSession::set_state(std::string_view s) {
  {
    std::lock_guard lock(mu_);
    state_ = s;
  }
  cv_.notify_all();
}

void AnnotationSession::run() {
  RunHooks hooks;
  hooks.on_phase = [this](std::string_view phase) {
    // "labeling" is entered by label_pool once the batch is published.
    if (phase != "labeling") set_state(phase);
  };
  hooks.on_cycle = [this](const CycleMetrics& m) {
    std::lock_guard lock(mu_);
    metrics_.push_back(m);
    cycle_ = m.cycle + 1;
    if (!metrics_path_.empty()) {
      std::ofstream out(metrics_path_, std::ios::app | std::ios::binary);
      out << metrics_to_json(m).dump() << '\n';
    }
  };
  try {
    run_experiment(config_, data_, config_.seeds.front(), *this, nullptr, hooks);
    set_state("completed");
  } catch (const std::exception& e) {
    std::lock_guard lock(mu_);
    state_ = cancelled_ ? "cancelled" : "failed";
    error_ = e.what();
    cv_.notify_all();
  }
}

std::vector<std::optional<int>> AnnotationSession::label_pool(const Pool&, std::span<const std::size_t> indices,
                                                              std::size_t cycle) {
  std::unique_lock lock(mu_);
  pending_.assign(indices.begin(), indices.end());
  answers_.clear();
  pending_cycle_ = cycle;
  state_ = "labeling";
  cv_.notify_all();
  cv_.wait(lock, [&] { return cancelled_ || answers_.size() == pending_.size(); });
  if (cancelled_) throw StateError("session cancelled");
  std::vector<std::optional<int>> out;
  for (auto i : pending_) out.push_back(answers_.at(i));
  pending_.clear();
  answers_.clear();
  state_ = "training";
  return out;
}

std::vector<std::optional<int>> AnnotationSession::label_synthetic(const Matrix& samples, std::size_t) {
  return std::vector<std::optional<int>>(samples.rows());
}

AnnotationSession::SubmitResult AnnotationSession::submit(const json& labels) {
  SubmitResult res;
  if (!labels.is_object() || labels.empty()) {
    res.status = SubmitStatus::kMalformed;
    res.message = "body must be a non-empty object of sample id -> class or \"skip\"";
    return res;
  }
  std::lock_guard lock(mu_);
  std::vector<std::pair<std::size_t, std::optional<int>>> parsed;
  for (auto it = labels.begin(); it != labels.end(); ++it) {
    std::size_t index = 0;
    const std::string& key = it.key();
    const bool numeric = !key.empty() && key.find_first_not_of("0123456789") == std::string::npos && key.size() < 19;
    if (numeric) index = std::stoull(key);
    const auto& v = it.value();
    std::optional<int> label;
    if (v.is_string() && v.get<std::string>() == "skip") {
      label = std::nullopt;
    } else if (v.is_number_integer() && v.get<long long>() >= 0 &&
               v.get<long long>() < static_cast<long long>(data_.pool.classes())) {
      label = v.get<int>();
    } else {
      res.status = SubmitStatus::kMalformed;
      res.message = "sample " + key + ": expected a class in [0, " + std::to_string(data_.pool.classes()) +
                    ") or \"skip\"";
      return res;
    }
    const bool known = numeric && std::find(pending_.begin(), pending_.end(), index) != pending_.end();
    if (!known) {
      res.status = SubmitStatus::kConflict;
      res.message = "sample " + key + " is not pending";
      return res;
    }
    if (answers_.count(index)) {
      res.status = SubmitStatus::kConflict;
      res.message = "sample " + key + " is already labeled";
      return res;
    }
    parsed.emplace_back(index, label);
  }
  for (const auto& [index, label] : parsed) answers_[index] = label;
  res.remaining = pending_.size() - answers_.size();
  cv_.notify_all();
  return res;
}

std::string AnnotationSession::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::size_t AnnotationSession::cycle() const {
  std::lock_guard lock(mu_);
  return cycle_;
}

std::vector<CycleMetrics> AnnotationSession::metrics() const {
  std::lock_guard lock(mu_);
  return metrics_;
}

void AnnotationSession::wait_until_idle() const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] {
    const bool waiting = state_ == "labeling" && answers_.size() < pending_.size();
    return waiting || state_ == "completed" || state_ == "failed" || state_ == "cancelled";
  });
}

ordered_json AnnotationSession::session_json() const {
  std::lock_guard lock(mu_);
  ordered_json j;
  j["session_id"] = id_;
  j["state"] = state_;
  j["cycle"] = cycle_;
  j["strategy"] = to_string(config_.strategy);
  j["labeled"] = metrics_.empty() ? 0 : metrics_.back().labeled;
  j["budget"] = config_.budget;
  j["pending"] = state_ == "labeling" ? pending_.size() - answers_.size() : 0;
  j["labeled_in_batch"] = answers_.size();
  j["classes"] = data_.pool.classes();
  if (!error_.empty()) j["error"] = error_;
  return j;
}

ordered_json AnnotationSession::batch_json() const {
  std::lock_guard lock(mu_);
  ordered_json j;
  j["cycle"] = pending_cycle_;
  j["classes"] = data_.pool.classes();
  j["samples"] = ordered_json::array();
  if (state_ != "labeling") return j;
  const Pool& pool = data_.pool;
  for (auto index : pending_) {
    if (answers_.count(index)) continue;
    ordered_json s;
    s["id"] = std::to_string(index);
    auto row = pool.samples().row(index);
    s["vector"] = std::vector<double>(row.begin(), row.end());
    if (display_.components.rows() == 2) {
      Matrix one(1, pool.width());
      std::copy(row.begin(), row.end(), one.row(0).begin());
      const Matrix p = kernels::serial::project(one, display_.mean, display_.components);
      s["projection"] = {p(0, 0), p(0, 1)};
    } else {
      s["projection"] = {row.empty() ? 0.0 : row[0], 0.0};
    }
    if (pool.image_shape()) {
      s["pixels"] = {{"rows", pool.image_shape()->rows},
                     {"cols", pool.image_shape()->cols},
                     {"values", std::vector<double>(row.begin(), row.end())}};
    }
    j["samples"].push_back(s);
  }
  return j;
}

ordered_json AnnotationSession::metrics_json() const {
  std::lock_guard lock(mu_);
  ordered_json j;
  j["records"] = ordered_json::array();
  for (const auto& m : metrics_) j["records"].push_back(metrics_to_json(m));
  return j;
}

AnnotationServer::AnnotationServer(AnnotationSession& session)
    : session_(session), server_(std::make_unique<httplib::Server>()) {
  auto reply = [](httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  server_->Get("/v1/session", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, session_.session_json());
  });
  server_->Get("/v1/batch", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, session_.batch_json());
  });
  server_->Get("/v1/metrics", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, session_.metrics_json());
  });
  server_->Post("/v1/labels", [this, reply](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      reply(res, 400, {{"error", "malformed JSON body"}});
      return;
    }
    const auto result = session_.submit(body);
    switch (result.status) {
      case AnnotationSession::SubmitStatus::kAccepted:
        reply(res, 200, {{"accepted", body.size()}, {"remaining", result.remaining}});
        break;
      case AnnotationSession::SubmitStatus::kConflict: reply(res, 409, {{"error", result.message}}); break;
      case AnnotationSession::SubmitStatus::kMalformed: reply(res, 400, {{"error", result.message}}); break;
    }
  });
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void AnnotationServer::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void AnnotationServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace asal
