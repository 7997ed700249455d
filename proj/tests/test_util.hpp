#pragma once

#include <random>

#include "lpreg/linalg.hpp"

namespace testutil {

inline lpreg::RowMat gaussian(lpreg::Index n, lpreg::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  lpreg::RowMat m(n, d);
  for (lpreg::Index i = 0; i < n; ++i)
    for (lpreg::Index j = 0; j < d; ++j) m(i, j) = nd(rng);
  return m;
}

inline lpreg::Vec gaussian_vec(lpreg::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  lpreg::Vec v(n);
  for (lpreg::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

inline lpreg::RowMat rows(std::initializer_list<std::initializer_list<double>> r) {
  lpreg::RowMat m(static_cast<lpreg::Index>(r.size()), static_cast<lpreg::Index>(r.begin()->size()));
  lpreg::Index i = 0;
  for (auto& row : r) {
    lpreg::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline lpreg::Vec vec(std::initializer_list<double> v) {
  lpreg::Vec out(static_cast<lpreg::Index>(v.size()));
  lpreg::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace testutil
