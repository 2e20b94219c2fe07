#pragma once

// Greedy target-model verification: walk from the root, at each accepted node
// take the target's argmax for the context so far and accept the child
// carrying that token, stopping at the first miss. Deterministic and
// sibling-order independent; every tree node counts toward gamma.

#include <span>
#include <vector>

#include "c2t/model.hpp"
#include "c2t/tree.hpp"

namespace c2t {

struct VerifyResult {
  int tau = 0;    // accepted draft tokens, root excluded
  int gamma = 0;  // candidate tokens, root excluded
  std::vector<NodeId> accepted_path;  // root -> deepest accepted node
  TokenId bonus_token = 0;            // target's next token at the stop point
};

// `context` is the committed sequence whose last token the tree's root
// represents. Acceptance labels are written back onto the nodes (root gets 1,
// the accepted path 1, everything else 0). Throws when a tree token is
// outside the target's vocab.
VerifyResult verify_greedy(TokenTree& tree, const TabularLM& target,
                           std::span<const TokenId> context);

}  // namespace c2t
