#pragma once

// Harvests labeled training corpora: full expand trees (no rerank), greedily
// verified, one (P, H, d, label) row per non-root node. The root carries no
// classifier features and is therefore not a row; positives per tree equal
// that round's tau.

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "c2t/classifier.hpp"
#include "c2t/model.hpp"

namespace c2t {

struct CorpusRow {
  int tree_id = 0;
  NodeId node_id = 0;
  double P = 0.0;
  double H = 0.0;
  int d = 0;
  int label = 0;
};

struct CorpusHeader {
  int topk = 10;
  int d_max = 11;
  std::uint64_t seed = 0;
  int count = 0;        // trees collected
  int prompts = 0;
  int prompt_len = 0;
  ModelPairSpec pair_spec;
};

struct Corpus {
  CorpusHeader header;
  std::vector<CorpusRow> rows;
};

struct CollectConfig {
  int topk = 10;
  int d_max = 11;
  int count = 100;       // trees to collect
  int prompts = 16;      // prompt streams; rounds are spread evenly over them
  int prompt_len = 8;
  int entropy_m = 1000;
  std::uint64_t seed = 0;
  int threads = -1;      // 0 = serial reference, -1 = OpenMP default
};

// Full expand trees have exactly 1 + K + (d_max - 1) * K^2 nodes when
// vocab >= K. Rows with non-finite features are dropped. Throws on an empty
// prompt set or count < 1.
Corpus collect_labeled_trees(const TabularLM& target, const TabularLM& draft,
                             const CollectConfig& config);

// Tree-granular split: all rows of a tree stay on one side. Throws when the
// corpus has fewer than 2 trees.
std::pair<Corpus, Corpus> split_dataset(const Corpus& corpus, double ratio, std::uint64_t seed);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

// View a corpus as classifier examples plus tree-id groups.
std::pair<std::vector<LabeledExample>, std::vector<int>> corpus_examples(const Corpus& corpus);

}  // namespace c2t
