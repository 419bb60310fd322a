#include "evolvex/api.hpp"

#include <charconv>
#include <optional>

#include <fmt/core.h>
#include <httplib.h>

namespace evolvex {

using nlohmann::json;

ServeState ServeState::build(const TemporalDataset& dataset, const Model& model) {
  ServeState s;
  s.history = conditioning_part(dataset);
  if (s.history.categories != model.encoder.categories) {
    throw ConfigError("checkpoint categories do not match the dataset");
  }
  if (s.history.directed != model.directed) throw ConfigError("checkpoint and dataset disagree on directedness");
  s.model = model;
  s.forecast = rollout(s.history, model, kServedStages);
  Adjacency graph = s.history.snapshots.back().adjacency;
  for (const auto& stage : s.forecast.stages) {
    s.cumulative.push_back(graph);
    for (auto [i, j] : stage.predicted_edges.edges()) graph.add(i, j);
  }
  return s;
}

void ApiService::load(std::shared_ptr<const ServeState> state) {
  state_ = std::move(state);
  ready_.store(true);
}

namespace {

ApiResponse error(int status, const std::string& message) { return {status, {{"error", message}}}; }

std::optional<int> parse_int(const std::string& text) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto slash = path.find('/', start);
    const auto end = slash == std::string::npos ? path.size() : slash;
    if (end > start) parts.push_back(path.substr(start, end - start));
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  return parts;
}

json country_of(const ServeState& s, int user) {
  return s.history.vocabularies.locations.at(s.history.profiles.at(user).location);
}

RankedList suggestions_for(const ServeState& s, int user, int stage) {
  const auto& f = s.forecast.stages[static_cast<std::size_t>(stage - 1)];
  return rank_candidates(user, f.edge_probs, s.cumulative[static_cast<std::size_t>(stage - 1)], 10, true);
}

json users_body(const ServeState& s) {
  json out = json::array();
  const auto& v = s.history.vocabularies;
  for (int i = 0; i < s.history.users(); ++i) {
    const auto& p = s.history.profiles[i];
    out.push_back({{"id", i},
                   {"age", p.age},
                   {"gender", v.genders.at(p.gender)},
                   {"occupation", v.occupations.at(p.occupation)},
                   {"country", v.locations.at(p.location)},
                   {"connections", s.history.snapshots.back().adjacency.degree(i)}});
  }
  return out;
}

json suggestions_body(const ServeState& s, int user, int stage) {
  const auto list = suggestions_for(s, user, stage);
  json items = json::array();
  for (std::size_t k = 0; k < list.ids.size(); ++k) {
    items.push_back({{"id", list.ids[k]}, {"confidence", list.probs[k]}, {"country", country_of(s, list.ids[k])}});
  }
  return {{"user", user}, {"stage", stage}, {"suggestions", std::move(items)}};
}

json map_body(const ServeState& s, int user, int stage) {
  json current = json::array();
  for (int j : s.cumulative[static_cast<std::size_t>(stage - 1)].neighbors(user)) {
    current.push_back({{"user", j}, {"country", country_of(s, j)}});
  }
  const auto list = suggestions_for(s, user, stage);
  json predicted = json::array();
  for (std::size_t k = 0; k < list.ids.size(); ++k) {
    predicted.push_back({{"user", list.ids[k]}, {"country", country_of(s, list.ids[k])}, {"confidence", list.probs[k]}});
  }
  return {{"user", user},
          {"stage", stage},
          {"country", country_of(s, user)},
          {"current", std::move(current)},
          {"predicted", std::move(predicted)}};
}

json activities_body(const ServeState& s, int user) {
  json history = json::array();
  for (int t = 0; t < s.history.steps(); ++t) {
    history.push_back({{"step", s.history.snapshots[t].step}, {"counts", s.history.category_counts(t, user)}});
  }
  json predicted = json::array();
  for (const auto& stage : s.forecast.stages) {
    const Vec row = stage.activity_probs.row(user).transpose();
    predicted.push_back({{"stage", stage.stage}, {"probabilities", std::vector<double>(row.data(), row.data() + row.size())}});
  }
  return {{"user", user},
          {"categories", s.history.categories},
          {"history", std::move(history)},
          {"predicted", std::move(predicted)}};
}

}  // namespace

ApiResponse ApiService::handle(const std::string& method, const std::string& path,
                               const std::map<std::string, std::string>& query) const {
  if (!ready_.load()) return error(503, "service is starting");
  if (method != "GET") return error(405, "only GET is supported");
  const auto& s = *state_;
  const auto parts = split_path(path);
  if (parts.size() < 2 || parts[0] != "api" || parts[1] != "users") return error(404, "no such endpoint");
  if (parts.size() == 2) return {200, users_body(s)};
  if (parts.size() != 4) return error(404, "no such endpoint");

  const auto user = parse_int(parts[2]);
  if (!user || *user < 0 || *user >= s.history.users()) return error(404, fmt::format("unknown user {}", parts[2]));
  const auto& resource = parts[3];
  if (resource == "activities") return {200, activities_body(s, *user)};
  if (resource != "suggestions" && resource != "map") return error(404, "no such endpoint");

  int stage = 1;
  if (const auto it = query.find("stage"); it != query.end()) {
    const auto parsed = parse_int(it->second);
    if (!parsed || *parsed < 1 || *parsed > kServedStages) {
      return error(400, fmt::format("stage must be an integer in [1, {}]", kServedStages));
    }
    stage = *parsed;
  }
  return {200, resource == "map" ? map_body(s, *user, stage) : suggestions_body(s, *user, stage)};
}

struct ApiServer::Impl {
  Impl(const ApiService& s, ServeOptions o) : service(s), options(std::move(o)) {}

  const ApiService& service;
  ServeOptions options;
  httplib::Server server;
};

ApiServer::ApiServer(const ApiService& service, ServeOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  auto& im = *impl_;
  im.server.Get(R"(/api/.*)", [&im](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const auto out = im.service.handle(req.method, req.path, query);
    res.status = out.status;
    res.set_header("Access-Control-Allow-Origin", im.options.cors_origin);
    res.set_content(out.body.dump(), "application/json");
  });
  im.server.Options(R"(/api/.*)", [&im](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Origin", im.options.cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
}

ApiServer::~ApiServer() = default;

int ApiServer::bind() {
  auto& im = *impl_;
  if (im.options.port == 0) {
    const int port = im.server.bind_to_any_port(im.options.host);
    if (port < 0) throw std::runtime_error(fmt::format("cannot bind {}", im.options.host));
    im.options.port = port;
  } else if (!im.server.bind_to_port(im.options.host, im.options.port)) {
    throw std::runtime_error(fmt::format("cannot bind {}:{}", im.options.host, im.options.port));
  }
  return im.options.port;
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

void ApiServer::stop() { impl_->server.stop(); }

void serve(ApiService& service, const ServeOptions& options) {
  ApiServer server(service, options);
  server.bind();
  server.listen();
}

}  // namespace evolvex
