#include "evolvex/external.hpp"

#include <cmath>

#include <fmt/core.h>
#include <httplib.h>

namespace evolvex {

using nlohmann::json;

std::vector<Vec> external_encode(const std::vector<std::string>& texts, const ExternalEncoderConfig& config,
                                 int dim) {
  const auto endpoint = Endpoint::parse(config.url);
  httplib::Client client(endpoint.base);
  const auto timeout = std::chrono::milliseconds(config.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const json request = {{"texts", texts}};
  auto res = client.Post(endpoint.path, request.dump(), "application/json");
  if (!res) {
    throw ExternalEncodeError(ExternalEncodeErrorKind::Transport,
                              fmt::format("encoder request failed: {}", httplib::to_string(res.error())));
  }
  if (res->status != 200) {
    throw ExternalEncodeError(ExternalEncodeErrorKind::Transport, fmt::format("encoder returned HTTP {}", res->status));
  }

  const json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.is_object() || !body.contains("vectors") || !body["vectors"].is_array()) {
    throw ExternalEncodeError(ExternalEncodeErrorKind::MalformedResponse, "encoder response lacks a vectors array");
  }
  const auto& vectors = body["vectors"];
  if (vectors.size() != texts.size()) {
    throw ExternalEncodeError(ExternalEncodeErrorKind::MalformedResponse,
                              fmt::format("encoder returned {} vectors for {} texts", vectors.size(), texts.size()));
  }

  // Validate the whole batch before returning anything.
  std::vector<Vec> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (!v.is_array()) throw ExternalEncodeError(ExternalEncodeErrorKind::MalformedResponse, "vector is not an array");
    if (static_cast<int>(v.size()) != dim) {
      throw ExternalEncodeError(ExternalEncodeErrorKind::DimensionMismatch,
                                fmt::format("encoder returned dimension {}, expected {}", v.size(), dim));
    }
    Vec row(dim);
    for (int i = 0; i < dim; ++i) {
      if (!v[i].is_number()) {
        throw ExternalEncodeError(ExternalEncodeErrorKind::NonFinite, "encoder returned a non-numeric entry");
      }
      row(i) = v[i].get<double>();
      if (!std::isfinite(row(i))) {
        throw ExternalEncodeError(ExternalEncodeErrorKind::NonFinite, "encoder returned a non-finite entry");
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace evolvex
