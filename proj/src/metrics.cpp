#include "evolvex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <fmt/core.h>

namespace evolvex {

using nlohmann::json;

Vec renormalize(const Vec& probs) {
  const double total = probs.sum();
  if (!(total > 0.0)) return Vec::Constant(probs.size(), 1.0 / static_cast<double>(probs.size()));
  return probs / total;
}

int dominant_category(const Vec& counts) {
  int best = -1;
  for (Eigen::Index c = 0; c < counts.size(); ++c) {
    if (counts(c) > 0.0 && (best < 0 || counts(c) > counts(best))) best = static_cast<int>(c);
  }
  return best;
}

double perplexity(const std::vector<Vec>& predicted, const std::vector<int>& actual) {
  if (predicted.empty()) throw std::invalid_argument("perplexity needs at least one prediction");
  if (predicted.size() != actual.size()) throw std::invalid_argument("perplexity inputs differ in length");
  double nll = 0.0;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    const Vec q = renormalize(predicted[k]);
    if (actual[k] < 0 || actual[k] >= q.size()) throw std::out_of_range("actual category outside distribution");
    nll -= std::log2(std::max(q(actual[k]), 1e-12));
  }
  // Base 2 keeps powers of two exact, so a uniform predictor scores exactly K.
  return std::exp2(nll / static_cast<double>(predicted.size()));
}

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc inputs differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum over positives of (#negatives below + 0.5 * #negatives tied).
  double wins = 0.0;
  double negatives_below = 0.0;
  long positives = 0;
  long negatives = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    long pos = 0;
    long neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      (labels[order[end]] ? pos : neg) += 1;
      ++end;
    }
    wins += static_cast<double>(pos) * (negatives_below + 0.5 * static_cast<double>(neg));
    negatives_below += static_cast<double>(neg);
    positives += pos;
    negatives += neg;
    start = end;
  }
  if (positives == 0 || negatives == 0) throw std::invalid_argument("auc needs both positive and negative labels");
  return wins / (static_cast<double>(positives) * static_cast<double>(negatives));
}

namespace {

bool listed(const std::vector<RankedList>& lists, int user, int target) {
  if (user < 0 || user >= static_cast<int>(lists.size())) return false;
  const auto& ids = lists[static_cast<std::size_t>(user)].ids;
  const auto top = ids.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(10, ids.size()));
  return std::find(ids.begin(), top, target) != top;
}

}  // namespace

double hits_at_10(const std::vector<RankedList>& lists, const std::vector<std::pair<int, int>>& truth, bool directed) {
  if (truth.empty()) throw std::invalid_argument("hits@10 needs at least one ground-truth edge");
  long hits = 0;
  for (auto [i, j] : truth) {
    if (listed(lists, i, j) || (!directed && listed(lists, j, i))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double precision_at_10(const std::vector<RankedList>& lists, const std::vector<std::pair<int, int>>& truth,
                       bool directed) {
  if (truth.empty()) throw std::invalid_argument("precision@10 needs at least one ground-truth edge");
  std::set<std::pair<int, int>> targets;
  std::set<int> users;
  for (auto [i, j] : truth) {
    targets.emplace(i, j);
    users.insert(i);
    if (!directed) {
      targets.emplace(j, i);
      users.insert(j);
    }
  }
  double sum = 0.0;
  for (int u : users) {
    if (u < 0 || u >= static_cast<int>(lists.size())) continue;
    const auto& list = lists[static_cast<std::size_t>(u)];
    const int denom = std::min(10, list.candidate_count);
    if (denom == 0) continue;
    int correct = 0;
    for (std::size_t r = 0; r < list.ids.size() && r < 10; ++r) correct += targets.count({u, list.ids[r]}) ? 1 : 0;
    sum += static_cast<double>(correct) / denom;
  }
  return sum / static_cast<double>(users.size());
}

CategoryCounts category_confusion(const Mat& predicted_probs, const Mat& true_counts) {
  if (predicted_probs.rows() != true_counts.rows() || predicted_probs.cols() != true_counts.cols()) {
    throw std::invalid_argument("macro-F1 inputs differ in shape");
  }
  const auto k = static_cast<std::size_t>(true_counts.cols());
  CategoryCounts out{std::vector<long>(k, 0), std::vector<long>(k, 0), std::vector<long>(k, 0)};
  for (Eigen::Index i = 0; i < true_counts.rows(); ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      const bool pred = classify_edge(predicted_probs(i, col));
      const bool truth = true_counts(i, col) > 0.0;
      if (pred && truth) ++out.tp[c];
      if (pred && !truth) ++out.fp[c];
      if (!pred && truth) ++out.fn[c];
    }
  }
  return out;
}

void accumulate(CategoryCounts& into, const CategoryCounts& more) {
  if (into.tp.empty()) {
    into = more;
    return;
  }
  for (std::size_t c = 0; c < into.tp.size(); ++c) {
    into.tp[c] += more.tp[c];
    into.fp[c] += more.fp[c];
    into.fn[c] += more.fn[c];
  }
}

double macro_f1(const CategoryCounts& counts) {
  if (counts.tp.empty()) throw std::invalid_argument("macro-F1 needs at least one category");
  double sum = 0.0;
  for (std::size_t c = 0; c < counts.tp.size(); ++c) {
    const long denom = 2 * counts.tp[c] + counts.fp[c] + counts.fn[c];
    sum += denom == 0 ? 1.0 : 2.0 * static_cast<double>(counts.tp[c]) / static_cast<double>(denom);
  }
  return sum / static_cast<double>(counts.tp.size());
}

double macro_f1(const Mat& predicted_probs, const Mat& true_counts) {
  return macro_f1(category_confusion(predicted_probs, true_counts));
}

double accuracy(const std::vector<double>& probs, const std::vector<int>& labels) {
  if (probs.empty()) throw std::invalid_argument("accuracy needs at least one pair");
  if (probs.size() != labels.size()) throw std::invalid_argument("accuracy inputs differ in length");
  long correct = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) correct += classify_edge(probs[k]) == (labels[k] != 0) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string optional_text(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : "n/a"; }

}  // namespace

json report_to_json(const EvalReport& report) {
  json stages = json::array();
  for (const auto& s : report.stages) {
    stages.push_back({{"stage", s.stage},
                      {"perplexity", s.perplexity},
                      {"precision_at_10", optional_json(s.precision_at_10)},
                      {"hits_at_10", optional_json(s.hits_at_10)},
                      {"auc_roc", optional_json(s.auc_roc)},
                      {"macro_f1", s.macro_f1},
                      {"accuracy", s.accuracy}});
  }
  json doc = {{"strategy", report.strategy},
              {"perplexity", report.perplexity},
              {"pseudo_perplexity", optional_json(report.pseudo_perplexity)},
              {"precision_at_10", optional_json(report.precision_at_10)},
              {"hits_at_10", optional_json(report.hits_at_10)},
              {"auc_roc", optional_json(report.auc_roc)},
              {"macro_f1", report.macro_f1},
              {"accuracy", report.accuracy},
              {"stages", std::move(stages)}};
  if (report.parse_failures) doc["parse_failures"] = *report.parse_failures;
  return doc;
}

std::string report_table(const EvalReport& report) {
  std::string out = fmt::format("strategy           {}\n", report.strategy);
  out += fmt::format("perplexity         {:.4f}\n", report.perplexity);
  out += fmt::format("pseudo_perplexity  {}\n", optional_text(report.pseudo_perplexity));
  out += fmt::format("precision_at_10    {}\n", optional_text(report.precision_at_10));
  out += fmt::format("hits_at_10         {}\n", optional_text(report.hits_at_10));
  out += fmt::format("auc_roc            {}\n", optional_text(report.auc_roc));
  out += fmt::format("macro_f1           {:.4f}\n", report.macro_f1);
  out += fmt::format("accuracy           {:.4f}\n", report.accuracy);
  if (report.parse_failures) out += fmt::format("parse_failures     {}\n", *report.parse_failures);
  return out;
}

}  // namespace evolvex
