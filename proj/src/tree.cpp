#include "c2t/tree.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "c2t/errors.hpp"

namespace c2t {

TokenTree::TokenTree(TokenId root_token) {
  TreeNode root;
  root.id = 0;
  root.parent = kNoParent;
  root.token = root_token;
  root.p = 1.0;
  root.P = 1.0;
  nodes_.push_back(root);
  child_lists_.emplace_back();
  layers_.push_back({0});
  node_layer_.push_back(0);
}

void TokenTree::check_id(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
    throw DataError("unknown node id: " + std::to_string(id));
}

const TreeNode& TokenTree::node(NodeId id) const {
  check_id(id);
  return nodes_[id];
}

TreeNode& TokenTree::node_mut(NodeId id) {
  check_id(id);
  return nodes_[id];
}

std::span<const NodeId> TokenTree::children(NodeId id) const {
  check_id(id);
  return child_lists_[id];
}

std::vector<NodeId> TokenTree::attach_children(NodeId parent, std::span<const TokenId> tokens,
                                               std::span<const double> probs) {
  check_id(parent);
  if (tokens.size() != probs.size())
    throw DataError("attach_children: token/prob length mismatch (" +
                    std::to_string(tokens.size()) + " vs " + std::to_string(probs.size()) + ")");
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0))
      throw DataError("attach_children: probability outside [0,1]: " + std::to_string(p));
  }
  if (tokens.empty()) return {};

  // Parents in the newest layer start the next drafting round.
  if (node_layer_[parent] == static_cast<std::int32_t>(layers_.size()) - 1) {
    layers_.emplace_back();
  }
  const std::int32_t layer = static_cast<std::int32_t>(layers_.size()) - 1;

  std::vector<NodeId> ids;
  ids.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    TreeNode n;
    n.id = static_cast<NodeId>(nodes_.size());
    n.parent = parent;
    n.token = tokens[i];
    n.p = probs[i];
    n.P = nodes_[parent].P * probs[i];
    n.d = layer - 1;
    nodes_.push_back(n);
    child_lists_.emplace_back();
    child_lists_[parent].push_back(n.id);
    layers_[layer].push_back(n.id);
    node_layer_.push_back(layer);
    ids.push_back(n.id);
  }
  return ids;
}

int TokenTree::depth_of(NodeId id) const {
  check_id(id);
  int depth = 0;
  for (NodeId cur = id; nodes_[cur].parent != kNoParent; cur = nodes_[cur].parent) ++depth;
  return depth;
}

std::vector<NodeId> path_to_root(const TokenTree& tree, NodeId id) {
  std::vector<NodeId> path;
  for (NodeId cur = id;; cur = tree.node(cur).parent) {
    path.push_back(cur);
    if (tree.node(cur).parent == kNoParent) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<std::uint8_t> ancestor_mask(const TokenTree& tree) {
  const int n = tree.size();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 0);
  // Topological storage: a parent's row is complete before its children's.
  for (NodeId i = 0; i < n; ++i) {
    const NodeId parent = tree.node(i).parent;
    if (parent != kNoParent) {
      std::copy_n(mask.begin() + static_cast<std::size_t>(parent) * n, n,
                  mask.begin() + static_cast<std::size_t>(i) * n);
    }
    mask[static_cast<std::size_t>(i) * n + i] = 1;
  }
  return mask;
}

bool is_connected_subtree(const TokenTree& tree, std::span<const NodeId> node_set) {
  std::unordered_set<NodeId> set(node_set.begin(), node_set.end());
  for (NodeId id : node_set) {
    const NodeId parent = tree.node(id).parent;
    if (id == tree.root() || parent == tree.root()) continue;
    if (!set.count(parent)) return false;
  }
  return true;
}

TokenTree extract_subtree(const TokenTree& tree, std::span<const NodeId> node_set) {
  if (!is_connected_subtree(tree, node_set))
    throw DataError("extract_subtree: node set is not a connected subtree");
  std::vector<NodeId> ordered(node_set.begin(), node_set.end());
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());
  if (!ordered.empty() && ordered.front() == tree.root()) ordered.erase(ordered.begin());

  TokenTree out(tree.node(tree.root()).token);
  {
    TreeNode& r = out.node_mut(out.root());
    const TreeNode& orig = tree.node(tree.root());
    r.H = orig.H;
    r.d = orig.d;
    r.C = orig.C;
    r.accepted = orig.accepted;
  }
  std::vector<NodeId> remap(tree.size(), kNoParent);
  remap[tree.root()] = out.root();
  for (NodeId id : ordered) {
    const TreeNode& n = tree.node(id);
    const NodeId new_parent = remap[n.parent];
    auto ids = out.attach_children(new_parent, std::span(&n.token, 1), std::span(&n.p, 1));
    TreeNode& copy = out.node_mut(ids[0]);
    copy.H = n.H;
    copy.d = n.d;
    copy.C = n.C;
    copy.accepted = n.accepted;
    remap[id] = ids[0];
  }
  return out;
}

namespace {

nlohmann::json node_to_json(const TreeNode& n) {
  nlohmann::json j;
  j["id"] = n.id;
  if (n.parent == kNoParent)
    j["parent"] = nullptr;
  else
    j["parent"] = n.parent;
  j["token"] = n.token;
  j["p"] = n.p;
  j["P"] = n.P;
  j["H"] = n.H;
  j["d"] = n.d;
  if (n.has_confidence())
    j["C"] = n.C;
  else
    j["C"] = nullptr;
  if (n.accepted == kLabelUnset)
    j["accepted"] = nullptr;
  else
    j["accepted"] = n.accepted != 0;
  return j;
}

}  // namespace

void dump_tree_jsonl(const TokenTree& tree, const TreeFileHeader& header, std::ostream& out) {
  nlohmann::json h;
  h["vocab"] = header.vocab;
  h["K"] = header.topk;
  h["d_max"] = header.d_max;
  h["strategy"] = header.strategy;
  h["seed"] = header.seed;
  out << h.dump() << "\n";
  for (const TreeNode& n : tree.nodes()) out << node_to_json(n).dump() << "\n";
}

TokenTree load_tree_jsonl(std::istream& in, TreeFileHeader* header) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("tree file: missing header line");
  nlohmann::json h = nlohmann::json::parse(line, nullptr, false);
  if (h.is_discarded() || !h.contains("vocab")) throw DataError("tree file: malformed header");
  if (header) {
    header->vocab = h.at("vocab").get<int>();
    header->topk = h.at("K").get<int>();
    header->d_max = h.at("d_max").get<int>();
    header->strategy = h.at("strategy").get<std::string>();
    header->seed = h.at("seed").get<std::uint64_t>();
  }

  bool have_root = false;
  TokenTree tree(0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("tree file: malformed node line: " + line);
    const bool is_root = j.at("parent").is_null();
    NodeId id;
    if (is_root) {
      if (have_root) throw DataError("tree file: multiple roots");
      have_root = true;
      tree = TokenTree(j.at("token").get<TokenId>());
      id = tree.root();
    } else {
      if (!have_root) throw DataError("tree file: node before root");
      const NodeId parent = j.at("parent").get<NodeId>();
      const TokenId token = j.at("token").get<TokenId>();
      const double p = j.at("p").get<double>();
      auto ids = tree.attach_children(parent, std::span(&token, 1), std::span(&p, 1));
      id = ids[0];
    }
    TreeNode& n = tree.node_mut(id);
    n.H = j.at("H").get<double>();
    n.d = j.at("d").get<int>();
    if (!j.at("C").is_null()) n.C = j.at("C").get<double>();
    if (!j.at("accepted").is_null()) n.accepted = j.at("accepted").get<bool>() ? 1 : 0;
  }
  if (!have_root) throw DataError("tree file: empty");
  return tree;
}

}  // namespace c2t
