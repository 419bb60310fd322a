#pragma once

// HTTP JSON contracts for optional external services: a text encoder and a
// chat-completion provider.

#include <stdexcept>
#include <string>
#include <vector>

#include "evolvex/embed.hpp"

namespace evolvex {

// "http://host:port/path" split into the client base and request path.
struct Endpoint {
  std::string base;
  std::string path;

  static Endpoint parse(const std::string& url);
};

enum class ExternalEncodeErrorKind { Transport, MalformedResponse, DimensionMismatch, NonFinite };

// Every kind means the caller must fall back to the built-in encoder.
class ExternalEncodeError : public std::runtime_error {
 public:
  ExternalEncodeError(ExternalEncodeErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ExternalEncodeErrorKind kind() const { return kind_; }

 private:
  ExternalEncodeErrorKind kind_;
};

// POST {texts:[...]} -> {vectors:[[...]]}. All-or-nothing per batch.
std::vector<Vec> external_encode(const std::vector<std::string>& texts, const ExternalEncoderConfig& config,
                                 int dim);

}  // namespace evolvex
