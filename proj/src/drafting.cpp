#include "c2t/drafting.hpp"

#include <algorithm>

#include "c2t/errors.hpp"
#include "c2t/features.hpp"
#include "c2t/select.hpp"

namespace c2t {

namespace {

TokenId root_token_for(std::span<const TokenId> context) {
  return context.empty() ? kBosToken : context.back();
}

struct FrontierNode {
  NodeId id;
  std::vector<TokenId> context;  // committed context + path tokens
};

struct Candidate {
  int frontier_slot;  // index into the current frontier
  TokenId token;
  double p;
  double P;
  double H;
  double C = 0.0;
};

}  // namespace

DraftConfig chain_preset_dymax() {
  DraftConfig c;
  c.strategy = Strategy::Chain;
  c.chain_stop = ChainStop::MaxProb;
  c.chain_threshold = 0.3;
  return c;
}

DraftConfig chain_preset_dyjoint() {
  DraftConfig c;
  c.strategy = Strategy::Chain;
  c.chain_stop = ChainStop::JointProb;
  c.chain_threshold = 0.08;
  return c;
}

DraftConfig chain_preset_c2t() {
  DraftConfig c;
  c.strategy = Strategy::Chain;
  c.chain_stop = ChainStop::Classifier;
  c.beta = 0.85;
  return c;
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::C2T: return "c2t";
    case Strategy::Eagle2: return "eagle2";
    case Strategy::Static: return "static";
    case Strategy::Chain: return "chain";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "c2t") return Strategy::C2T;
  if (name == "eagle2") return Strategy::Eagle2;
  if (name == "static") return Strategy::Static;
  if (name == "chain") return Strategy::Chain;
  throw DataError("unknown strategy: " + name);
}

TokenTree draft_c2t(const TabularLM& draft_model, const MlpParams& classifier,
                    std::span<const TokenId> context, const DraftConfig& config) {
  if (config.topk < 1) throw DataError("draft_c2t: K must be >= 1");
  if (config.d_max < 1) throw DataError("draft_c2t: d_max must be >= 1");
  if (!(config.beta >= 0.0 && config.beta <= 1.0)) throw DataError("draft_c2t: beta out of [0,1]");

  TokenTree tree(root_token_for(context));
  std::vector<FrontierNode> frontier;
  frontier.push_back({tree.root(), {context.begin(), context.end()}});

  double layer_best_c = 1.0;  // C_r = 1 starts the loop
  std::vector<double> row;
  for (int d = 0; d < config.d_max; ++d) {
    if (!(layer_best_c > config.beta)) break;

    std::vector<Candidate> candidates;
    candidates.reserve(frontier.size() * static_cast<std::size_t>(config.topk));
    for (int slot = 0; slot < static_cast<int>(frontier.size()); ++slot) {
      const FrontierNode& f = frontier[slot];
      draft_model.next_dist_into(f.context, row);
      const double h = truncated_entropy(row, config.entropy_m);
      const double parent_joint = tree.node(f.id).P;
      for (TokenId t : topk_indices(row, config.topk)) {
        candidates.push_back({slot, t, row[t], parent_joint * row[t], h});
      }
    }
    if (candidates.empty()) break;

    layer_best_c = 0.0;
    for (Candidate& c : candidates) {
      c.C = mlp_forward(classifier, FeatureVector{c.P, c.H, static_cast<double>(d)});
      layer_best_c = std::max(layer_best_c, c.C);
    }

    // Survivors keep generation order (frontier order, then p desc) so node
    // ids stay deterministic; only candidates with C < beta are dropped.
    std::vector<int> survivors;
    for (int i = 0; i < static_cast<int>(candidates.size()); ++i)
      if (!(candidates[i].C < config.beta)) survivors.push_back(i);
    if (survivors.empty()) break;

    // Expansion frontier: top-K survivors by confidence.
    std::vector<int> by_conf = survivors;
    std::stable_sort(by_conf.begin(), by_conf.end(), [&](int a, int b) {
      const Candidate& ca = candidates[a];
      const Candidate& cb = candidates[b];
      if (ca.C != cb.C) return ca.C > cb.C;
      if (ca.p != cb.p) return ca.p > cb.p;
      return ca.token < cb.token;
    });
    if (static_cast<int>(by_conf.size()) > config.topk) by_conf.resize(config.topk);

    std::vector<bool> selected(candidates.size(), false);
    for (int i : by_conf) selected[i] = true;

    const std::vector<int>& appended = config.second_topk ? by_conf : survivors;
    std::vector<int> appended_sorted(appended.begin(), appended.end());
    std::sort(appended_sorted.begin(), appended_sorted.end());

    std::vector<FrontierNode> next_frontier;
    for (int i : appended_sorted) {
      const Candidate& c = candidates[i];
      const NodeId parent_id = frontier[c.frontier_slot].id;
      auto ids = tree.attach_children(parent_id, std::span(&c.token, 1), std::span(&c.p, 1));
      TreeNode& n = tree.node_mut(ids[0]);
      n.H = c.H;
      n.C = c.C;
      if (selected[i]) {
        FrontierNode fn;
        fn.context = frontier[c.frontier_slot].context;
        fn.context.push_back(c.token);
        fn.id = ids[0];
        next_frontier.push_back(std::move(fn));
      }
    }
    frontier = std::move(next_frontier);
    if (frontier.empty()) break;
  }
  return tree;
}

Eagle2Result draft_eagle2(const TabularLM& draft_model, std::span<const TokenId> context,
                          const DraftConfig& config) {
  if (config.topk < 1) throw DataError("draft_eagle2: K must be >= 1");
  if (config.d_max < 1) throw DataError("draft_eagle2: d_max must be >= 1");
  if (config.rerank_n < 1) throw DataError("draft_eagle2: N must be >= 1");

  TokenTree tree(root_token_for(context));
  std::vector<FrontierNode> frontier;
  frontier.push_back({tree.root(), {context.begin(), context.end()}});

  std::vector<double> row;
  for (int round = 0; round < config.d_max; ++round) {
    struct NewNode {
      NodeId id;
      double P;
      double p;
      TokenId token;
      int frontier_slot;
    };
    std::vector<NewNode> layer;
    for (int slot = 0; slot < static_cast<int>(frontier.size()); ++slot) {
      const FrontierNode& f = frontier[slot];
      draft_model.next_dist_into(f.context, row);
      const double h = truncated_entropy(row, config.entropy_m);
      const double parent_joint = tree.node(f.id).P;
      const auto top = topk_indices(row, config.topk);
      std::vector<double> probs;
      probs.reserve(top.size());
      for (TokenId t : top) probs.push_back(row[t]);
      auto ids = tree.attach_children(f.id, top, probs);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        tree.node_mut(ids[i]).H = h;
        layer.push_back({ids[i], parent_joint * probs[i], probs[i], top[i], slot});
      }
    }
    if (layer.empty()) break;

    // Next frontier: the layer's top-K by joint probability.
    std::vector<int> order(layer.size());
    for (int i = 0; i < static_cast<int>(order.size()); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (layer[a].P != layer[b].P) return layer[a].P > layer[b].P;
      if (layer[a].p != layer[b].p) return layer[a].p > layer[b].p;
      return layer[a].token < layer[b].token;
    });
    if (static_cast<int>(order.size()) > config.topk) order.resize(config.topk);

    std::vector<FrontierNode> next_frontier;
    for (int i : order) {
      FrontierNode fn;
      fn.context = frontier[layer[i].frontier_slot].context;
      fn.context.push_back(layer[i].token);
      fn.id = layer[i].id;
      next_frontier.push_back(std::move(fn));
    }
    frontier = std::move(next_frontier);
  }

  // Rerank: top-N nodes by joint probability; ties prefer smaller depth,
  // then smaller token index. Parent P >= child P makes the pick a connected
  // subtree.
  std::vector<NodeId> all;
  for (NodeId id = 1; id < tree.size(); ++id) all.push_back(id);
  std::stable_sort(all.begin(), all.end(), [&](NodeId a, NodeId b) {
    const TreeNode& na = tree.node(a);
    const TreeNode& nb = tree.node(b);
    if (na.P != nb.P) return na.P > nb.P;
    if (na.d != nb.d) return na.d < nb.d;
    if (na.token != nb.token) return na.token < nb.token;
    return a < b;
  });
  if (static_cast<int>(all.size()) > config.rerank_n) all.resize(config.rerank_n);
  std::sort(all.begin(), all.end());
  return Eagle2Result{std::move(tree), std::move(all)};
}

TokenTree draft_static(const TabularLM& draft_model, std::span<const TokenId> context,
                       std::span<const int> shape) {
  if (shape.empty()) throw DataError("draft_static: shape must be non-empty");
  for (int b : shape) {
    if (b < 1) throw DataError("draft_static: branch count must be >= 1");
    if (b > draft_model.vocab())
      throw DataError("draft_static: branch count " + std::to_string(b) + " exceeds vocab " +
                      std::to_string(draft_model.vocab()));
  }

  // Greedy spine: each layer fans out under the previous layer's best node.
  TokenTree tree(root_token_for(context));
  std::vector<TokenId> spine_ctx(context.begin(), context.end());
  NodeId spine = tree.root();
  std::vector<double> row;
  for (int b : shape) {
    draft_model.next_dist_into(spine_ctx, row);
    const double h = truncated_entropy(row, static_cast<int>(row.size()));
    const auto top = topk_indices(row, b);
    std::vector<double> probs;
    for (TokenId t : top) probs.push_back(row[t]);
    auto ids = tree.attach_children(spine, top, probs);
    for (NodeId id : ids) tree.node_mut(id).H = h;
    spine = ids[0];
    spine_ctx.push_back(top[0]);
  }
  return tree;
}

TokenTree draft_chain(const TabularLM& draft_model, const MlpParams* classifier,
                      std::span<const TokenId> context, const DraftConfig& config) {
  if (config.max_len < 1) throw DataError("draft_chain: max_len must be >= 1");
  if (config.chain_stop == ChainStop::Classifier && classifier == nullptr)
    throw DataError("draft_chain: classifier stop criterion requires a classifier");

  TokenTree tree(root_token_for(context));
  std::vector<TokenId> ctx(context.begin(), context.end());
  NodeId cur = tree.root();
  double joint = 1.0;
  std::vector<double> row;
  for (int i = 0; i < config.max_len; ++i) {
    draft_model.next_dist_into(ctx, row);
    const TokenId t = argmax_index(row);
    const double p = row[t];
    const double h = truncated_entropy(row, config.entropy_m);
    auto ids = tree.attach_children(cur, std::span(&t, 1), std::span(&p, 1));
    TreeNode& n = tree.node_mut(ids[0]);
    n.H = h;
    joint *= p;
    double conf = 0.0;
    if (classifier != nullptr) {
      conf = mlp_forward(*classifier, FeatureVector{joint, h, static_cast<double>(i)});
      n.C = conf;
    }
    cur = ids[0];
    ctx.push_back(t);
    if (i + 1 == config.max_len) break;

    bool fire = false;
    switch (config.chain_stop) {
      case ChainStop::None: break;
      case ChainStop::MaxProb: fire = p < config.chain_threshold; break;
      case ChainStop::JointProb: fire = joint < config.chain_threshold; break;
      case ChainStop::Classifier: fire = conf < config.beta; break;
    }
    if (fire) break;
  }
  return tree;
}

}  // namespace c2t
