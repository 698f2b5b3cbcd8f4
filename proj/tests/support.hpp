#pragma once

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "univqm/tensor.hpp"

namespace support {

inline oracle::Vec to_vec(const univqm::CVector& v) { return oracle::Vec(v.data(), v.data() + v.size()); }

inline oracle::Mat to_mat(const univqm::CMatrix& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
  return out;
}

inline double max_diff(const univqm::CMatrix& a, const oracle::Mat& b) {
  if (static_cast<std::size_t>(a.rows()) != b.rows || static_cast<std::size_t>(a.cols()) != b.cols) return INFINITY;
  double d = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      d = std::max(d, std::abs(a(i, j) - b(static_cast<std::size_t>(i), static_cast<std::size_t>(j))));
  return d;
}

inline std::vector<std::size_t> dims_of(const univqm::SubsystemLayout& layout) {
  std::vector<std::size_t> dims;
  for (const auto& s : layout.subsystems()) dims.push_back(s.dim());
  return dims;
}

}  // namespace support
