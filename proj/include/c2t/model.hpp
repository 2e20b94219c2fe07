#pragma once

// Synthetic order-k tabular language models standing in for the draft/target
// pair. Rows are produced procedurally: the row for a context is a symmetric
// Dirichlet draw whose concentration is picked from a weighted schedule, all
// seeded by (model seed, context), so a model is fully determined by its spec
// and never needs to exist in memory at once. Small tables are materialized
// dense for speed; the bytes are identical either way.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "c2t/rng.hpp"
#include "c2t/tree.hpp"

namespace c2t {

struct ConcentrationComponent {
  double alpha = 1.0;
  double weight = 1.0;
};

enum class DraftMode { MixturePerturb, LowerOrder };

struct ModelPairSpec {
  int vocab = 1024;
  int order = 1;
  std::uint64_t seed = 0;
  std::vector<ConcentrationComponent> schedule;  // empty = default_schedule()
  double draft_noise = 0.2;                      // epsilon
  DraftMode draft_mode = DraftMode::MixturePerturb;
  // Required coverage of the 7 entropy bins [0,1)...[6,inf) by realized row
  // entropies, measured at build time. 0 disables the check.
  int min_entropy_bins = 0;
};

// Eight concentrations whose expected row entropies ladder across all seven
// bins once vocab >= 1024.
std::vector<ConcentrationComponent> default_schedule();

void validate_spec(const ModelPairSpec& spec);

constexpr TokenId kBosToken = 0;
constexpr int kEntropyBins = 7;

class TabularLM {
 public:
  int vocab() const { return vocab_; }
  int order() const { return order_; }
  const ModelPairSpec& spec() const { return spec_; }
  const std::string& role() const { return role_; }

  // Distribution over the next token given the last `order` context tokens
  // (BOS-padded when shorter). Throws on out-of-range tokens.
  std::vector<double> next_dist(std::span<const TokenId> context) const;
  void next_dist_into(std::span<const TokenId> context, std::vector<double>& out) const;

  // Greedy argmax walk, ties broken by smallest token index.
  std::vector<TokenId> greedy_continuation(std::span<const TokenId> context, int len) const;

  // Categorical draw from the context's row.
  TokenId sample(std::span<const TokenId> context, Rng& rng) const;

  // Realized row-entropy histogram measured at build time (target models).
  const std::array<int, kEntropyBins>& entropy_histogram() const { return entropy_hist_; }
  int entropy_bins_covered() const;

  bool is_dense() const { return !dense_.empty(); }

  enum class RowStorage { Procedural, Jsonl, Dense };
  void save(const std::filesystem::path& path, RowStorage storage = RowStorage::Procedural) const;
  static TabularLM load(const std::filesystem::path& path);

 private:
  friend TabularLM gen_target(const ModelPairSpec&, int);
  friend TabularLM derive_draft(const TabularLM&, const ModelPairSpec&, int);

  void generate_row(std::span<const TokenId> padded_ctx, std::vector<double>& out) const;
  void fetch_row(std::span<const TokenId> context, std::vector<double>& out) const;
  std::size_t context_index(std::span<const TokenId> padded_ctx) const;
  void materialize(int threads);
  void measure_histogram();

  int vocab_ = 0;
  int order_ = 1;
  ModelPairSpec spec_;
  std::string role_;  // "target" | "draft"
  std::vector<double> dense_;
  std::unordered_map<std::uint64_t, std::vector<double>> explicit_rows_;
  bool procedural_ = true;
  std::array<int, kEntropyBins> entropy_hist_{};
  int hist_rows_ = 0;
};

// Build the target model. threads: 0 = serial reference loop, -1 = OpenMP
// default, n > 0 = OpenMP with n threads; results are identical. Throws
// DataError when the measured entropy coverage falls short of
// spec.min_entropy_bins (the vocab is too small for the requested spread).
TabularLM gen_target(const ModelPairSpec& spec, int threads = -1);

// Derive the draft model. MixturePerturb: row = (1-eps)*target + eps*noise,
// exact identity at eps = 0. LowerOrder: order k-1 rows as the uniform
// average of target rows over the marginalized leading token; requires
// order >= 2.
TabularLM derive_draft(const TabularLM& target, const ModelPairSpec& spec, int threads = -1);

// Ancestral sample of `len` tokens from the target, stream "prompt"/id.
std::vector<TokenId> sample_prompt(const TabularLM& target, int len, std::uint64_t seed,
                                   int prompt_id);

std::string spec_to_json(const ModelPairSpec& spec);
ModelPairSpec spec_from_json(const std::string& text);

}  // namespace c2t
