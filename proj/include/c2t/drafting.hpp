#pragma once

// Tree and chain construction strategies.
//
// c2t builds layer by layer: every frontier node emits its top-K children by
// generation probability (the cheap first pruning, so the classifier only
// ever scores K tokens per parent), the classifier scores all candidates,
// candidates with C < beta are dropped, and the top-K survivors by confidence
// become the next frontier. With second_topk on only that frontier enters the
// tree (layers capped at K nodes); with it off every survivor is kept as a
// verification candidate while expansion stays capped at K. The loop stops at
// d_max or when no candidate clears beta (the root starts the loop with
// confidence 1).
//
// eagle2 expands for d_max rounds retaining every per-parent top-K child,
// picks each next frontier as the layer's top-K by joint probability, then
// reranks: T2 = top-N nodes of T1 by joint probability, which is always a
// connected subtree since P never increases along a path.

#include <optional>
#include <span>
#include <vector>

#include "c2t/classifier.hpp"
#include "c2t/model.hpp"
#include "c2t/tree.hpp"

namespace c2t {

enum class Strategy { C2T, Eagle2, Static, Chain };

enum class ChainStop { None, MaxProb, JointProb, Classifier };

struct DraftConfig {
  Strategy strategy = Strategy::C2T;
  int topk = 15;      // K
  int d_max = 10;
  double beta = 0.5;
  int rerank_n = 60;  // N (eagle2)
  bool second_topk = true;
  int entropy_m = 1000;  // top-M entropy truncation
  ChainStop chain_stop = ChainStop::None;
  double chain_threshold = 0.0;
  int max_len = 10;                // chain length cap
  std::vector<int> static_shape;   // per-layer branch counts
};

// Named chain presets: DyMax threshold 0.3, DyJoint threshold 0.08, and the
// classifier criterion at beta = 0.85.
DraftConfig chain_preset_dymax();
DraftConfig chain_preset_dyjoint();
DraftConfig chain_preset_c2t();

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

// The drafting context is the committed sequence; its last token (BOS when
// empty) becomes the tree root.
TokenTree draft_c2t(const TabularLM& draft_model, const MlpParams& classifier,
                    std::span<const TokenId> context, const DraftConfig& config);

struct Eagle2Result {
  TokenTree t1;
  std::vector<NodeId> t2;  // top-N node ids of t1, root implicit
};

Eagle2Result draft_eagle2(const TabularLM& draft_model, std::span<const TokenId> context,
                          const DraftConfig& config);

TokenTree draft_static(const TabularLM& draft_model, std::span<const TokenId> context,
                       std::span<const int> shape);

// Degenerate chain. Emits at least one token, then stops when the configured
// criterion fires: max_prob = last distribution's max below threshold,
// joint_prob = running P below threshold, classifier = C below beta.
TokenTree draft_chain(const TabularLM& draft_model, const MlpParams* classifier,
                      std::span<const TokenId> context, const DraftConfig& config);

}  // namespace c2t
