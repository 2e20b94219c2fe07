#pragma once

// Token tree shared by every drafting strategy. Nodes are stored append-only
// in topological order with dense integer ids; joint probability is computed
// incrementally at attach time. Layers group nodes by drafting round:
// layers[0] is the root, nodes attached in round k land in layers[k] and
// carry depth counter d = k - 1 (first draft layer has d = 0).

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace c2t {

using TokenId = std::int32_t;
using NodeId = std::int32_t;

constexpr NodeId kNoParent = -1;
constexpr std::int8_t kLabelUnset = -1;

struct TreeNode {
  NodeId id = 0;
  NodeId parent = kNoParent;
  TokenId token = 0;
  double p = 1.0;  // generation probability
  double P = 1.0;  // joint probability along the root path
  double H = 0.0;  // entropy of the distribution this node was drawn from
  int d = 0;       // depth counter assigned by the drafting loop
  double C = std::numeric_limits<double>::quiet_NaN();  // confidence, NaN = unset
  std::int8_t accepted = kLabelUnset;                   // -1 unset, 0/1 label

  bool has_confidence() const { return !std::isnan(C); }
};

class TokenTree {
 public:
  explicit TokenTree(TokenId root_token);

  NodeId root() const { return 0; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const TreeNode& node(NodeId id) const;
  TreeNode& node_mut(NodeId id);
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<std::vector<NodeId>>& layers() const { return layers_; }
  std::span<const NodeId> children(NodeId id) const;

  // One new node per token, P = parent.P * p, appended to the current
  // drafting layer (a fresh layer opens when the parent sits in the newest
  // one). Throws DataError on unknown parent, length mismatch, or p outside
  // [0, 1].
  std::vector<NodeId> attach_children(NodeId parent, std::span<const TokenId> tokens,
                                      std::span<const double> probs);

  // Structural depth (root = 0); distinct from the d feature counter.
  int depth_of(NodeId id) const;

 private:
  void check_id(NodeId id) const;
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<NodeId>> child_lists_;
  std::vector<std::vector<NodeId>> layers_;
  std::vector<std::int32_t> node_layer_;
};

// Path from root to node, consecutive entries parent -> child.
std::vector<NodeId> path_to_root(const TokenTree& tree, NodeId id);

// Row-major n*n mask, mask[i][j] = 1 iff j lies on the path root -> i
// (inclusive of i).
std::vector<std::uint8_t> ancestor_mask(const TokenTree& tree);

// True iff the set plus the root is closed under the parent relation.
bool is_connected_subtree(const TokenTree& tree, std::span<const NodeId> node_set);

// New tree containing root plus the given nodes (which must form a connected
// subtree), original insertion order preserved, empty rounds compacted.
// Feature fields (p, P, H, d, C, accepted) are copied verbatim.
TokenTree extract_subtree(const TokenTree& tree, std::span<const NodeId> node_set);

struct TreeFileHeader {
  int vocab = 0;
  int topk = 0;
  int d_max = 0;
  std::string strategy;
  std::uint64_t seed = 0;
};

// JSONL: header line first, then one line per node, root first.
void dump_tree_jsonl(const TokenTree& tree, const TreeFileHeader& header, std::ostream& out);
TokenTree load_tree_jsonl(std::istream& in, TreeFileHeader* header = nullptr);

}  // namespace c2t
