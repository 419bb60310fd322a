#pragma once

// Read-only JSON service over a loaded dataset, checkpoint and precomputed
// four-stage forecast.

#include <atomic>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "evolvex/model.hpp"

namespace evolvex {

inline constexpr int kServedStages = 4;

struct ServeState {
  TemporalDataset history;  // conditioning snapshots
  Model model;
  EvolutionForecast forecast;
  // cumulative[s - 1]: last observed graph plus predicted edges of stages < s.
  std::vector<Adjacency> cumulative;

  static ServeState build(const TemporalDataset& dataset, const Model& model);
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

class ApiService {
 public:
  // Answers 503 until load() has been called.
  ApiService() = default;

  void load(std::shared_ptr<const ServeState> state);
  bool ready() const { return ready_.load(); }

  ApiResponse handle(const std::string& method, const std::string& path,
                     const std::map<std::string, std::string>& query) const;

 private:
  std::shared_ptr<const ServeState> state_;
  std::atomic<bool> ready_{false};
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
};

// HTTP front end for an ApiService. Port 0 picks a free port.
class ApiServer {
 public:
  ApiServer(const ApiService& service, ServeOptions options);
  ~ApiServer();

  // Throws std::runtime_error if the port cannot be bound. Returns the port.
  int bind();
  void listen();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// bind() then listen().
void serve(ApiService& service, const ServeOptions& options);

}  // namespace evolvex
