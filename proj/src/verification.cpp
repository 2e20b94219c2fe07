#include "c2t/verification.hpp"

#include "c2t/errors.hpp"
#include "c2t/select.hpp"

namespace c2t {

VerifyResult verify_greedy(TokenTree& tree, const TabularLM& target,
                           std::span<const TokenId> context) {
  for (const TreeNode& n : tree.nodes()) {
    if (n.token < 0 || n.token >= target.vocab())
      throw DataError("verify_greedy: tree token outside target vocab: " + std::to_string(n.token));
  }
  for (NodeId id = 0; id < tree.size(); ++id) tree.node_mut(id).accepted = 0;
  tree.node_mut(tree.root()).accepted = 1;

  VerifyResult result;
  result.gamma = tree.size() - 1;
  result.accepted_path.push_back(tree.root());

  std::vector<TokenId> ctx(context.begin(), context.end());
  std::vector<double> row;
  NodeId cur = tree.root();
  for (;;) {
    target.next_dist_into(ctx, row);
    const TokenId want = argmax_index(row);
    NodeId next = kNoParent;
    for (NodeId child : tree.children(cur)) {
      if (tree.node(child).token == want) {
        next = child;
        break;
      }
    }
    if (next == kNoParent) {
      result.bonus_token = want;
      break;
    }
    tree.node_mut(next).accepted = 1;
    result.accepted_path.push_back(next);
    ctx.push_back(want);
    cur = next;
  }
  result.tau = static_cast<int>(result.accepted_path.size()) - 1;
  return result;
}

}  // namespace c2t
