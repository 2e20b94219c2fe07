#pragma once

// Top-k index selection over probability vectors. One global tie rule keeps
// every strategy comparable: higher probability first, then smaller index.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace c2t {

inline bool prob_index_less(double pa, std::int32_t ia, double pb, std::int32_t ib) {
  if (pa != pb) return pa > pb;
  return ia < ib;
}

// Indices of the k largest entries, sorted by (value desc, index asc).
inline std::vector<std::int32_t> topk_indices(std::span<const double> v, int k) {
  const int n = static_cast<int>(v.size());
  if (k > n) k = n;
  std::vector<std::int32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto cmp = [&](std::int32_t a, std::int32_t b) {
    return prob_index_less(v[a], a, v[b], b);
  };
  if (k < n) {
    std::nth_element(idx.begin(), idx.begin() + k, idx.end(), cmp);
    idx.resize(k);
  }
  std::sort(idx.begin(), idx.end(), cmp);
  return idx;
}

// Argmax with smallest-index tie break.
inline std::int32_t argmax_index(std::span<const double> v) {
  std::int32_t best = 0;
  for (std::int32_t i = 1; i < static_cast<std::int32_t>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace c2t
