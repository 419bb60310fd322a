#include "evolvex/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "evolvex/types.hpp"

namespace evolvex {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Concat:
      return "concat";
    case Strategy::Attention:
      return "attention";
    case Strategy::CrossModal:
      return "crossmodal";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view tag) {
  if (tag == "concat") return Strategy::Concat;
  if (tag == "attention") return Strategy::Attention;
  if (tag == "crossmodal") return Strategy::CrossModal;
  throw ConfigError("unknown fusion strategy '" + std::string(tag) + "' (expected concat, attention or crossmodal)");
}

std::array<double, 3> softmax3(const std::array<double, 3>& logits) {
  const double top = std::max({logits[0], logits[1], logits[2]});
  std::array<double, 3> out{};
  double total = 0.0;
  for (int m = 0; m < 3; ++m) {
    out[m] = std::exp(logits[m] - top);
    total += out[m];
  }
  for (auto& a : out) a /= total;
  return out;
}

ModalityTriple project(const Vec& raw_d, const Vec& raw_p, const Vec& raw_e, const FusionParams& params) {
  ModalityTriple t;
  t.e_d = params.proj_d * raw_d;
  t.e_p = params.proj_p * raw_p;
  t.e_e = params.proj_e * raw_e;
  return t;
}

Vec initial_previous(const ModalityTriple& triple) { return (triple.e_d + triple.e_p + triple.e_e) / 3.0; }

FusedEmbedding fuse_concat(const ModalityTriple& triple) {
  const auto d = triple.e_d.size();
  FusedEmbedding out;
  out.strategy = Strategy::Concat;
  out.step = triple.step;
  out.f.resize(3 * d);
  out.f << triple.e_d, triple.e_p, triple.e_e;
  return out;
}

namespace {

FusedEmbedding weighted_sum(const ModalityTriple& triple, const std::array<double, 3>& alphas, Strategy s) {
  FusedEmbedding out;
  out.strategy = s;
  out.step = triple.step;
  out.alphas = alphas;
  out.f = alphas[0] * triple.e_d + alphas[1] * triple.e_p + alphas[2] * triple.e_e;
  return out;
}

// Backward through alpha = softmax(logits), f = sum_m alpha_m e_m. Returns the
// logit gradient and adds the direct path into the triple gradient.
std::array<double, 3> softmax_sum_backward(const ModalityTriple& triple, const std::array<double, 3>& alphas,
                                           const Vec& grad_f, TripleGrad& grad) {
  std::array<double, 3> grad_alpha{};
  double mean = 0.0;
  for (int m = 0; m < 3; ++m) {
    grad_alpha[m] = grad_f.dot(triple[m]);
    mean += alphas[m] * grad_alpha[m];
    grad[m] = alphas[m] * grad_f;
  }
  std::array<double, 3> grad_logit{};
  for (int m = 0; m < 3; ++m) grad_logit[m] = alphas[m] * (grad_alpha[m] - mean);
  return grad_logit;
}

}  // namespace

FusedEmbedding fuse_attention(const ModalityTriple& triple, const FusionParams& params) {
  const std::array<double, 3> scores = {params.w_d.dot(triple.e_d), params.w_p.dot(triple.e_p),
                                        params.w_e.dot(triple.e_e)};
  return weighted_sum(triple, softmax3(scores), Strategy::Attention);
}

FusedEmbedding fuse_crossmodal(const ModalityTriple& triple, const Vec& f_prev, const FusionParams& params) {
  const Vec q = params.w_q * f_prev;
  const double scale = 1.0 / std::sqrt(static_cast<double>(triple.dim()));
  const std::array<double, 3> logits = {q.dot(triple.e_d) * scale, q.dot(triple.e_p) * scale,
                                        q.dot(triple.e_e) * scale};
  return weighted_sum(triple, softmax3(logits), Strategy::CrossModal);
}

FusedEmbedding fuse(const ModalityTriple& triple, const std::optional<Vec>& f_prev, const FusionParams& params) {
  switch (params.strategy) {
    case Strategy::Concat:
      return fuse_concat(triple);
    case Strategy::Attention:
      return fuse_attention(triple, params);
    case Strategy::CrossModal:
      return fuse_crossmodal(triple, f_prev ? *f_prev : initial_previous(triple), params);
  }
  throw ConfigError("unknown fusion strategy");
}

TripleGrad concat_backward(const ModalityTriple& triple, const Vec& grad_f) {
  const auto d = triple.e_d.size();
  return {grad_f.segment(0, d), grad_f.segment(d, d), grad_f.segment(2 * d, d)};
}

AttentionGrad attention_backward(const ModalityTriple& triple, const FusionParams& params,
                                 const FusedEmbedding& fused, const Vec& grad_f) {
  AttentionGrad g;
  const auto grad_score = softmax_sum_backward(triple, *fused.alphas, grad_f, g.triple);
  g.triple.e_d += grad_score[0] * params.w_d;
  g.triple.e_p += grad_score[1] * params.w_p;
  g.triple.e_e += grad_score[2] * params.w_e;
  g.w_d = grad_score[0] * triple.e_d;
  g.w_p = grad_score[1] * triple.e_p;
  g.w_e = grad_score[2] * triple.e_e;
  return g;
}

CrossModalGrad crossmodal_backward(const ModalityTriple& triple, const Vec& f_prev, const FusionParams& params,
                                   const FusedEmbedding& fused, const Vec& grad_f) {
  CrossModalGrad g;
  const auto grad_logit = softmax_sum_backward(triple, *fused.alphas, grad_f, g.triple);
  const double scale = 1.0 / std::sqrt(static_cast<double>(triple.dim()));
  const Vec q = params.w_q * f_prev;
  Vec grad_q = Vec::Zero(q.size());
  for (int m = 0; m < 3; ++m) {
    g.triple[m] += (grad_logit[m] * scale) * q;
    grad_q += (grad_logit[m] * scale) * triple[m];
  }
  g.w_q = grad_q * f_prev.transpose();
  g.f_prev = params.w_q.transpose() * grad_q;
  return g;
}

}  // namespace evolvex
