#pragma once

// Concatenation, softmax-weighted attention and cross-modal (query from the
// previous fused state) fusion of the three modality embeddings.

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "evolvex/types.hpp"

namespace evolvex {

enum class Strategy { Concat, Attention, CrossModal };

std::string_view to_string(Strategy s);
// Throws ConfigError for unknown tags.
Strategy parse_strategy(std::string_view tag);

// The three modality vectors after projection to the common dimension d.
struct ModalityTriple {
  Vec e_d;
  Vec e_p;
  Vec e_e;
  int user = 0;
  int step = 0;

  int dim() const { return static_cast<int>(e_d.size()); }
  const Vec& operator[](int m) const { return m == 0 ? e_d : (m == 1 ? e_p : e_e); }
  Vec& operator[](int m) { return m == 0 ? e_d : (m == 1 ? e_p : e_e); }
};

struct FusionParams {
  Strategy strategy = Strategy::Concat;
  // Learned projections raw -> d.
  Mat proj_d;
  Mat proj_p;
  Mat proj_e;
  // Attention score vectors (1 x d each).
  Vec w_d;
  Vec w_p;
  Vec w_e;
  // Cross-modal query map (d x d).
  Mat w_q;

  int dim() const { return static_cast<int>(proj_d.rows()); }
  int fused_dim() const { return strategy == Strategy::Concat ? 3 * dim() : dim(); }
};

struct FusedEmbedding {
  Vec f;
  Strategy strategy = Strategy::Concat;
  std::optional<std::array<double, 3>> alphas;
  int step = 0;
};

// Numerically stable softmax (max subtraction).
std::array<double, 3> softmax3(const std::array<double, 3>& logits);

ModalityTriple project(const Vec& raw_d, const Vec& raw_p, const Vec& raw_e, const FusionParams& params);

// Neutral previous state used at the first step: (e_d + e_p + e_e) / 3.
Vec initial_previous(const ModalityTriple& triple);

FusedEmbedding fuse_concat(const ModalityTriple& triple);
FusedEmbedding fuse_attention(const ModalityTriple& triple, const FusionParams& params);
FusedEmbedding fuse_crossmodal(const ModalityTriple& triple, const Vec& f_prev, const FusionParams& params);
// Concat and attention ignore f_prev.
FusedEmbedding fuse(const ModalityTriple& triple, const std::optional<Vec>& f_prev, const FusionParams& params);

struct TripleGrad {
  Vec e_d;
  Vec e_p;
  Vec e_e;

  Vec& operator[](int m) { return m == 0 ? e_d : (m == 1 ? e_p : e_e); }
};

TripleGrad concat_backward(const ModalityTriple& triple, const Vec& grad_f);

struct AttentionGrad {
  TripleGrad triple;
  Vec w_d;
  Vec w_p;
  Vec w_e;
};

AttentionGrad attention_backward(const ModalityTriple& triple, const FusionParams& params,
                                 const FusedEmbedding& fused, const Vec& grad_f);

struct CrossModalGrad {
  TripleGrad triple;
  Vec f_prev;
  Mat w_q;
};

CrossModalGrad crossmodal_backward(const ModalityTriple& triple, const Vec& f_prev, const FusionParams& params,
                                   const FusedEmbedding& fused, const Vec& grad_f);

}  // namespace evolvex
