#pragma once

// The classifier's three features: joint probability P, truncated entropy H
// (natural log), depth counter d.

#include <span>

#include "c2t/tree.hpp"

namespace c2t {

struct FeatureVector {
  double P = 0.0;
  double H = 0.0;
  double d = 0.0;
};

// -sum p*log(p) over the M largest probabilities (ties by smallest index);
// zero terms contribute 0. Throws DataError for M < 1 or a non-distribution
// input. Selected terms are summed in (p desc, index asc) order so results
// are reproducible bit for bit.
double truncated_entropy(std::span<const double> dist, int M);

// Features of a non-root node: P and H are read from the node (H was cached
// at draft time from the parent's output distribution, shared by siblings),
// d is the drafting-loop depth counter. The root has no features (strategies
// pin its confidence to 1); requesting them throws.
FeatureVector node_features(const TokenTree& tree, NodeId id);

}  // namespace c2t
