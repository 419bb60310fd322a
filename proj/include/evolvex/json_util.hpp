#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "evolvex/types.hpp"

namespace evolvex {

inline nlohmann::json matrix_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat matrix_from(const nlohmann::json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r == 0 ? 0 : static_cast<Eigen::Index>(rows[0].size());
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != c) throw std::runtime_error("ragged matrix in JSON");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

inline nlohmann::json vector_json(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vec vector_from(const nlohmann::json& values) {
  const auto raw = values.get<std::vector<double>>();
  return Eigen::Map<const Vec>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

inline void write_json_file(const nlohmann::json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(1) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return nlohmann::json::parse(in);
}

}  // namespace evolvex
