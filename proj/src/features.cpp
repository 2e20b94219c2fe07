#include "c2t/features.hpp"

#include <cmath>

#include "c2t/errors.hpp"
#include "c2t/select.hpp"

namespace c2t {

double truncated_entropy(std::span<const double> dist, int M) {
  if (M < 1) throw DataError("truncated_entropy: M must be >= 1");
  double sum = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || p > 1.0) throw DataError("truncated_entropy: entry outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw DataError("truncated_entropy: input does not sum to 1");

  // Summing in (p desc, index asc) order for every M makes the sequence of
  // results an exact prefix sum: monotone in M down to the last ulp.
  double h = 0.0;
  for (std::int32_t i : topk_indices(dist, M)) {
    const double p = dist[i];
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

FeatureVector node_features(const TokenTree& tree, NodeId id) {
  const TreeNode& n = tree.node(id);
  if (n.parent == kNoParent)
    throw DataError("node_features: root has no classifier features");
  return FeatureVector{n.P, n.H, static_cast<double>(n.d)};
}

}  // namespace c2t
