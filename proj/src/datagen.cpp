#include "c2t/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "c2t/drafting.hpp"
#include "c2t/errors.hpp"
#include "c2t/rng.hpp"
#include "c2t/verification.hpp"

namespace c2t {

namespace {

// Rows for one prompt's quota of rounds; tree ids are assigned after the
// prompt-ordered merge.
std::vector<CorpusRow> collect_for_prompt(const TabularLM& target, const TabularLM& draft,
                                          const CollectConfig& config, int prompt_id, int quota) {
  std::vector<TokenId> ctx = sample_prompt(target, config.prompt_len, config.seed, prompt_id);

  DraftConfig dc;
  dc.strategy = Strategy::Eagle2;
  dc.topk = config.topk;
  dc.d_max = config.d_max;
  dc.entropy_m = config.entropy_m;
  dc.rerank_n = 1;  // unused: the full T1 is harvested

  std::vector<CorpusRow> rows;
  for (int round = 0; round < quota; ++round) {
    Eagle2Result r = draft_eagle2(draft, ctx, dc);
    const VerifyResult v = verify_greedy(r.t1, target, ctx);
    for (NodeId id = 1; id < r.t1.size(); ++id) {
      const TreeNode& n = r.t1.node(id);
      if (!std::isfinite(n.P) || !std::isfinite(n.H)) continue;
      rows.push_back({round, id, n.P, n.H, n.d, n.accepted == 1 ? 1 : 0});
    }
    for (std::size_t i = 1; i < v.accepted_path.size(); ++i)
      ctx.push_back(r.t1.node(v.accepted_path[i]).token);
    ctx.push_back(v.bonus_token);
  }
  return rows;
}

}  // namespace

Corpus collect_labeled_trees(const TabularLM& target, const TabularLM& draft,
                             const CollectConfig& config) {
  if (config.prompts < 1) throw DataError("collect: empty prompt set");
  if (config.count < 1) throw DataError("collect: count must be >= 1");
  if (config.topk < 1 || config.d_max < 1) throw DataError("collect: K and d_max must be >= 1");

  const int prompts = std::min(config.prompts, config.count);
  std::vector<int> quota(prompts, config.count / prompts);
  for (int i = 0; i < config.count % prompts; ++i) ++quota[i];

  std::vector<std::vector<CorpusRow>> per_prompt(prompts);
  if (config.threads == 0) {
    for (int p = 0; p < prompts; ++p)
      per_prompt[p] = collect_for_prompt(target, draft, config, p, quota[p]);
  } else {
#ifdef _OPENMP
    if (config.threads > 0) omp_set_num_threads(config.threads);
#pragma omp parallel for schedule(dynamic)
    for (int p = 0; p < prompts; ++p)
      per_prompt[p] = collect_for_prompt(target, draft, config, p, quota[p]);
#else
    for (int p = 0; p < prompts; ++p)
      per_prompt[p] = collect_for_prompt(target, draft, config, p, quota[p]);
#endif
  }

  Corpus corpus;
  corpus.header.topk = config.topk;
  corpus.header.d_max = config.d_max;
  corpus.header.seed = config.seed;
  corpus.header.count = config.count;
  corpus.header.prompts = prompts;
  corpus.header.prompt_len = config.prompt_len;
  corpus.header.pair_spec = target.spec();

  // Merge in prompt order, renumbering local round ids into global tree ids.
  int next_tree = 0;
  for (int p = 0; p < prompts; ++p) {
    int local_prev = -1;
    for (const CorpusRow& r : per_prompt[p]) {
      if (r.tree_id != local_prev) {
        local_prev = r.tree_id;
        ++next_tree;
      }
      CorpusRow out = r;
      out.tree_id = next_tree - 1;
      corpus.rows.push_back(out);
    }
  }
  return corpus;
}

std::pair<Corpus, Corpus> split_dataset(const Corpus& corpus, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw DataError("split_dataset: ratio must be in (0,1)");
  std::vector<int> trees;
  for (const CorpusRow& r : corpus.rows)
    if (trees.empty() || trees.back() != r.tree_id) trees.push_back(r.tree_id);
  std::sort(trees.begin(), trees.end());
  trees.erase(std::unique(trees.begin(), trees.end()), trees.end());
  if (trees.size() < 2) throw DataError("split_dataset: fewer than 2 trees");

  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(trees);
  std::size_t n_train =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(trees.size()) + 0.5));
  n_train = std::clamp<std::size_t>(n_train, 1, trees.size() - 1);

  const int max_tree = *std::max_element(trees.begin(), trees.end());
  std::vector<bool> in_train(static_cast<std::size_t>(max_tree) + 1, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[trees[i]] = true;

  Corpus train, val;
  train.header = corpus.header;
  val.header = corpus.header;
  for (const CorpusRow& r : corpus.rows)
    (in_train[r.tree_id] ? train : val).rows.push_back(r);
  train.header.count = static_cast<int>(n_train);
  val.header.count = static_cast<int>(trees.size() - n_train);
  return {std::move(train), std::move(val)};
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  nlohmann::json h;
  h["c2t_corpus"] = 1;
  h["K"] = corpus.header.topk;
  h["d_max"] = corpus.header.d_max;
  h["seed"] = corpus.header.seed;
  h["count"] = corpus.header.count;
  h["prompts"] = corpus.header.prompts;
  h["prompt_len"] = corpus.header.prompt_len;
  h["model_pair_spec"] = nlohmann::json::parse(spec_to_json(corpus.header.pair_spec));
  out << h.dump() << "\n";
  for (const CorpusRow& r : corpus.rows) {
    nlohmann::json j;
    j["tree_id"] = r.tree_id;
    j["node_id"] = r.node_id;
    j["P"] = r.P;
    j["H"] = r.H;
    j["d"] = r.d;
    j["label"] = r.label;
    out << j.dump() << "\n";
  }
  if (!out) throw DataError("corpus write failed: " + path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("corpus file: missing header");
  nlohmann::json h = nlohmann::json::parse(line, nullptr, false);
  if (h.is_discarded() || !h.contains("c2t_corpus"))
    throw DataError("corpus file: malformed header");
  Corpus corpus;
  corpus.header.topk = h.at("K").get<int>();
  corpus.header.d_max = h.at("d_max").get<int>();
  corpus.header.seed = h.at("seed").get<std::uint64_t>();
  corpus.header.count = h.at("count").get<int>();
  corpus.header.prompts = h.value("prompts", 0);
  corpus.header.prompt_len = h.value("prompt_len", 0);
  corpus.header.pair_spec = spec_from_json(h.at("model_pair_spec").dump());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("corpus file: malformed row: " + line);
    CorpusRow r;
    r.tree_id = j.at("tree_id").get<int>();
    r.node_id = j.at("node_id").get<NodeId>();
    r.P = j.at("P").get<double>();
    r.H = j.at("H").get<double>();
    r.d = j.at("d").get<int>();
    r.label = j.at("label").get<int>();
    corpus.rows.push_back(r);
  }
  return corpus;
}

std::pair<std::vector<LabeledExample>, std::vector<int>> corpus_examples(const Corpus& corpus) {
  std::vector<LabeledExample> ex;
  std::vector<int> groups;
  ex.reserve(corpus.rows.size());
  groups.reserve(corpus.rows.size());
  for (const CorpusRow& r : corpus.rows) {
    ex.push_back({FeatureVector{r.P, r.H, static_cast<double>(r.d)}, r.label});
    groups.push_back(r.tree_id);
  }
  return {std::move(ex), std::move(groups)};
}

}  // namespace c2t
