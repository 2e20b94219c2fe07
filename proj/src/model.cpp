#include "c2t/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "c2t/csvio.hpp"
#include "c2t/errors.hpp"
#include "c2t/features.hpp"
#include "c2t/select.hpp"

namespace c2t {

namespace {

// Dense tables up to this many doubles (128 MiB).
constexpr std::size_t kDenseLimitDoubles = std::size_t(1) << 24;
constexpr int kHistogramSampleRows = 4096;

std::vector<TokenId> pad_context(std::span<const TokenId> context, int order, int vocab) {
  std::vector<TokenId> padded(static_cast<std::size_t>(order), kBosToken);
  const std::size_t take = std::min<std::size_t>(context.size(), static_cast<std::size_t>(order));
  for (std::size_t i = 0; i < take; ++i) {
    const TokenId t = context[context.size() - take + i];
    if (t < 0 || t >= vocab) throw DataError("context token out of range: " + std::to_string(t));
    padded[order - take + i] = t;
  }
  return padded;
}

std::string draft_mode_name(DraftMode m) {
  return m == DraftMode::MixturePerturb ? "mixture-perturb" : "lower-order";
}

DraftMode draft_mode_from_name(const std::string& s) {
  if (s == "mixture-perturb") return DraftMode::MixturePerturb;
  if (s == "lower-order") return DraftMode::LowerOrder;
  throw DataError("unknown draft mode: " + s);
}

void dirichlet_row(Rng& rng, double alpha, std::vector<double>& out) {
  double sum = 0.0;
  for (double& x : out) {
    x = rng.gamma(alpha);
    sum += x;
  }
  if (sum <= 0.0) {
    // Vanishing gamma draws at extreme alpha; fall back to a one-hot row.
    std::fill(out.begin(), out.end(), 0.0);
    out[rng.below(out.size())] = 1.0;
    return;
  }
  for (double& x : out) x /= sum;
}

}  // namespace

std::vector<ConcentrationComponent> default_schedule() {
  const double alphas[] = {0.0005, 0.002, 0.008, 0.03, 0.06, 0.12, 0.5, 4.0};
  std::vector<ConcentrationComponent> s;
  for (double a : alphas) s.push_back({a, 1.0 / 8.0});
  return s;
}

void validate_spec(const ModelPairSpec& spec) {
  if (spec.vocab < 2) throw DataError("model spec: vocab must be >= 2");
  if (spec.order < 1) throw DataError("model spec: order must be >= 1");
  if (!(spec.draft_noise >= 0.0 && spec.draft_noise <= 1.0))
    throw DataError("model spec: draft_noise must be in [0,1]");
  if (!spec.schedule.empty()) {
    double wsum = 0.0;
    for (const auto& c : spec.schedule) {
      if (!(c.alpha > 0.0)) throw DataError("model spec: concentration must be > 0");
      if (!(c.weight >= 0.0)) throw DataError("model spec: weight must be >= 0");
      wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw DataError("model spec: weights must sum to 1");
  }
  if (spec.min_entropy_bins < 0 || spec.min_entropy_bins > kEntropyBins)
    throw DataError("model spec: min_entropy_bins out of range");
}

std::size_t TabularLM::context_index(std::span<const TokenId> padded_ctx) const {
  std::size_t idx = 0;
  for (TokenId t : padded_ctx) idx = idx * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(t);
  return idx;
}

void TabularLM::generate_row(std::span<const TokenId> padded_ctx, std::vector<double>& out) const {
  out.resize(static_cast<std::size_t>(vocab_));
  const std::uint64_t ctx_hash = hash_tokens(padded_ctx);

  if (role_ == "target") {
    Rng rng(derive_seed(spec_.seed, "target-row", ctx_hash));
    const auto& schedule = spec_.schedule.empty() ? default_schedule() : spec_.schedule;
    double u = rng.u01();
    double alpha = schedule.back().alpha;
    double acc = 0.0;
    for (const auto& c : schedule) {
      acc += c.weight;
      if (u < acc) {
        alpha = c.alpha;
        break;
      }
    }
    dirichlet_row(rng, alpha, out);
    return;
  }

  if (spec_.draft_mode == DraftMode::MixturePerturb) {
    // Same spec/seed regenerates the exact target row this draft perturbs.
    TabularLM tgt;
    tgt.vocab_ = vocab_;
    tgt.order_ = order_;
    tgt.spec_ = spec_;
    tgt.role_ = "target";
    tgt.generate_row(padded_ctx, out);
    const double eps = spec_.draft_noise;
    if (eps == 0.0) return;
    Rng rng(derive_seed(spec_.seed, "draft-noise", ctx_hash));
    std::vector<double> noise(static_cast<std::size_t>(vocab_));
    dirichlet_row(rng, 1.0, noise);
    double sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = (1.0 - eps) * out[i] + eps * noise[i];
      sum += out[i];
    }
    for (double& x : out) x /= sum;
    return;
  }

  // LowerOrder: this draft has order k-1; average the order-k target rows
  // over the marginalized leading token.
  TabularLM tgt;
  tgt.vocab_ = vocab_;
  tgt.order_ = order_ + 1;
  tgt.spec_ = spec_;
  tgt.role_ = "target";
  std::vector<TokenId> full_ctx(static_cast<std::size_t>(order_) + 1);
  std::copy(padded_ctx.begin(), padded_ctx.end(), full_ctx.begin() + 1);
  std::vector<double> row(static_cast<std::size_t>(vocab_));
  std::fill(out.begin(), out.end(), 0.0);
  for (TokenId lead = 0; lead < vocab_; ++lead) {
    full_ctx[0] = lead;
    tgt.generate_row(full_ctx, row);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += row[i];
  }
  const double inv = 1.0 / static_cast<double>(vocab_);
  for (double& x : out) x *= inv;
}

void TabularLM::fetch_row(std::span<const TokenId> context, std::vector<double>& out) const {
  const std::vector<TokenId> padded = pad_context(context, order_, vocab_);
  if (!dense_.empty()) {
    const std::size_t idx = context_index(padded);
    out.assign(dense_.begin() + idx * vocab_, dense_.begin() + (idx + 1) * vocab_);
    return;
  }
  if (!explicit_rows_.empty()) {
    auto it = explicit_rows_.find(hash_tokens(padded));
    if (it != explicit_rows_.end()) {
      out = it->second;
      return;
    }
    if (!procedural_)
      throw DataError("model row not materialized for context and no generator spec present");
  }
  if (!procedural_) throw DataError("model has no rows and no generator spec");
  generate_row(padded, out);
}

std::vector<double> TabularLM::next_dist(std::span<const TokenId> context) const {
  std::vector<double> out;
  fetch_row(context, out);
  return out;
}

void TabularLM::next_dist_into(std::span<const TokenId> context, std::vector<double>& out) const {
  fetch_row(context, out);
}

std::vector<TokenId> TabularLM::greedy_continuation(std::span<const TokenId> context, int len) const {
  if (len < 0) throw DataError("greedy_continuation: negative length");
  std::vector<TokenId> ctx(context.begin(), context.end());
  std::vector<TokenId> result;
  std::vector<double> row;
  for (int i = 0; i < len; ++i) {
    next_dist_into(ctx, row);
    const TokenId t = argmax_index(row);
    result.push_back(t);
    ctx.push_back(t);
  }
  return result;
}

TokenId TabularLM::sample(std::span<const TokenId> context, Rng& rng) const {
  std::vector<double> row;
  fetch_row(context, row);
  const double u = rng.u01();
  double acc = 0.0;
  TokenId last_positive = 0;
  for (TokenId i = 0; i < vocab_; ++i) {
    if (row[i] > 0.0) last_positive = i;
    acc += row[i];
    if (u < acc) return i;
  }
  return last_positive;
}

int TabularLM::entropy_bins_covered() const {
  int n = 0;
  for (int c : entropy_hist_)
    if (c > 0) ++n;
  return n;
}

void TabularLM::materialize(int threads) {
  double rows_d = 1.0;
  for (int i = 0; i < order_; ++i) rows_d *= static_cast<double>(vocab_);
  if (rows_d * vocab_ > static_cast<double>(kDenseLimitDoubles)) return;
  const std::size_t rows = static_cast<std::size_t>(rows_d);
  dense_.resize(rows * static_cast<std::size_t>(vocab_));

  auto fill_row = [&](std::size_t r) {
    std::vector<TokenId> ctx(static_cast<std::size_t>(order_));
    std::size_t rem = r;
    for (int i = order_ - 1; i >= 0; --i) {
      ctx[i] = static_cast<TokenId>(rem % vocab_);
      rem /= vocab_;
    }
    std::vector<double> row;
    generate_row(ctx, row);
    std::copy(row.begin(), row.end(), dense_.begin() + r * vocab_);
  };

  if (threads == 0) {
    // Serial reference path.
    for (std::size_t r = 0; r < rows; ++r) fill_row(r);
    return;
  }
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(rows); ++r)
    fill_row(static_cast<std::size_t>(r));
#else
  for (std::size_t r = 0; r < rows; ++r) fill_row(r);
#endif
}

void TabularLM::measure_histogram() {
  entropy_hist_.fill(0);
  std::size_t rows = 1;
  bool overflow = false;
  for (int i = 0; i < order_; ++i) {
    if (rows > (std::size_t(1) << 50) / vocab_) {
      overflow = true;
      break;
    }
    rows *= static_cast<std::size_t>(vocab_);
  }

  std::vector<double> row;
  auto account = [&](std::span<const double> r) {
    const double h = truncated_entropy(r, static_cast<int>(r.size()));
    int bin = static_cast<int>(std::floor(h));
    bin = std::clamp(bin, 0, kEntropyBins - 1);
    entropy_hist_[bin] += 1;
    ++hist_rows_;
  };

  if (!dense_.empty() && rows <= kHistogramSampleRows && !overflow) {
    for (std::size_t r = 0; r < rows; ++r)
      account(std::span(dense_.data() + r * vocab_, static_cast<std::size_t>(vocab_)));
    return;
  }
  Rng rng(derive_seed(spec_.seed, "hist"));
  std::vector<TokenId> ctx(static_cast<std::size_t>(order_));
  for (int s = 0; s < kHistogramSampleRows; ++s) {
    for (auto& t : ctx) t = static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(vocab_)));
    fetch_row(ctx, row);
    account(row);
  }
}

TabularLM gen_target(const ModelPairSpec& spec, int threads) {
  validate_spec(spec);
  TabularLM m;
  m.vocab_ = spec.vocab;
  m.order_ = spec.order;
  m.spec_ = spec;
  if (m.spec_.schedule.empty()) m.spec_.schedule = default_schedule();
  m.role_ = "target";
  m.materialize(threads);
  m.measure_histogram();
  if (m.entropy_bins_covered() < spec.min_entropy_bins) {
    throw DataError("vocab too small for requested entropy spread: covered " +
                    std::to_string(m.entropy_bins_covered()) + " of " +
                    std::to_string(spec.min_entropy_bins) + " required bins");
  }
  return m;
}

TabularLM derive_draft(const TabularLM& target, const ModelPairSpec& spec, int threads) {
  validate_spec(spec);
  if (spec.draft_mode == DraftMode::LowerOrder && spec.order < 2)
    throw DataError("lower-order draft requires order >= 2");
  TabularLM m;
  m.vocab_ = spec.vocab;
  m.order_ = spec.draft_mode == DraftMode::LowerOrder ? spec.order - 1 : spec.order;
  m.spec_ = spec;
  if (m.spec_.schedule.empty()) m.spec_.schedule = default_schedule();
  m.role_ = "draft";
  (void)target;  // draft rows regenerate the target's rows from the shared spec
  if (spec.draft_mode == DraftMode::MixturePerturb) m.materialize(threads);
  return m;
}

std::vector<TokenId> sample_prompt(const TabularLM& target, int len, std::uint64_t seed,
                                   int prompt_id) {
  Rng rng(derive_seed(seed, "prompt", static_cast<std::uint64_t>(prompt_id)));
  std::vector<TokenId> ctx;
  ctx.reserve(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) ctx.push_back(target.sample(ctx, rng));
  return ctx;
}

namespace {

nlohmann::json spec_json_obj(const ModelPairSpec& spec) {
  nlohmann::json j;
  j["vocab"] = spec.vocab;
  j["order"] = spec.order;
  j["seed"] = spec.seed;
  nlohmann::json sched = nlohmann::json::array();
  for (const auto& c : spec.schedule) sched.push_back({c.alpha, c.weight});
  j["schedule"] = sched;
  j["draft_noise"] = spec.draft_noise;
  j["draft_mode"] = draft_mode_name(spec.draft_mode);
  j["min_entropy_bins"] = spec.min_entropy_bins;
  return j;
}

ModelPairSpec spec_from_json_obj(const nlohmann::json& s) {
  ModelPairSpec spec;
  spec.vocab = s.at("vocab").get<int>();
  spec.order = s.at("order").get<int>();
  spec.seed = s.at("seed").get<std::uint64_t>();
  spec.schedule.clear();
  for (const auto& c : s.at("schedule"))
    spec.schedule.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
  spec.draft_noise = s.at("draft_noise").get<double>();
  spec.draft_mode = draft_mode_from_name(s.at("draft_mode").get<std::string>());
  spec.min_entropy_bins = s.at("min_entropy_bins").get<int>();
  return spec;
}

}  // namespace

std::string spec_to_json(const ModelPairSpec& spec) { return spec_json_obj(spec).dump(); }

ModelPairSpec spec_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError("malformed model pair spec JSON");
  ModelPairSpec spec = spec_from_json_obj(j);
  validate_spec(spec);
  return spec;
}

void TabularLM::save(const std::filesystem::path& path, RowStorage storage) const {
  nlohmann::json spec_j = spec_json_obj(spec_);

  nlohmann::json h;
  h["c2t_model"] = 1;
  h["role"] = role_;
  h["vocab"] = vocab_;
  h["order"] = order_;
  h["seed"] = spec_.seed;
  h["spec"] = spec_j;
  nlohmann::json hist = nlohmann::json::array();
  for (int c : entropy_hist_) hist.push_back(c);
  h["entropy_histogram"] = hist;

  std::size_t rows = 1;
  for (int i = 0; i < order_; ++i) rows *= static_cast<std::size_t>(vocab_);

  switch (storage) {
    case RowStorage::Procedural:
      h["rows"] = "procedural";
      break;
    case RowStorage::Jsonl:
      h["rows"] = "jsonl";
      break;
    case RowStorage::Dense: {
      if (dense_.empty()) throw DataError("save: model not materialized, cannot write dense blob");
      h["rows"] = "dense";
      h["rows_file"] = path.filename().string() + ".bin";
      break;
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << h.dump() << "\n";

  if (storage == RowStorage::Jsonl) {
    std::vector<TokenId> ctx(static_cast<std::size_t>(order_));
    std::vector<double> row;
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t rem = r;
      for (int i = order_ - 1; i >= 0; --i) {
        ctx[i] = static_cast<TokenId>(rem % vocab_);
        rem /= vocab_;
      }
      fetch_row(ctx, row);
      nlohmann::json j;
      j["ctx"] = ctx;
      j["p"] = row;
      out << j.dump() << "\n";
    }
  } else if (storage == RowStorage::Dense) {
    std::ofstream bin(path.string() + ".bin", std::ios::binary);
    if (!bin) throw DataError("cannot open for writing: " + path.string() + ".bin");
    bin.write(reinterpret_cast<const char*>(dense_.data()),
              static_cast<std::streamsize>(dense_.size() * sizeof(double)));
    if (!bin) throw DataError("dense blob write failed");
  }
  if (!out) throw DataError("model write failed: " + path.string());
}

TabularLM TabularLM::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("model file: missing header");
  nlohmann::json h = nlohmann::json::parse(line, nullptr, false);
  if (h.is_discarded() || !h.contains("c2t_model")) throw DataError("model file: malformed header");

  TabularLM m;
  m.vocab_ = h.at("vocab").get<int>();
  m.order_ = h.at("order").get<int>();
  m.role_ = h.at("role").get<std::string>();
  if (h.contains("spec")) {
    m.spec_ = spec_from_json_obj(h.at("spec"));
    validate_spec(m.spec_);
  } else {
    m.procedural_ = false;
  }
  if (h.contains("entropy_histogram")) {
    const auto& hist = h.at("entropy_histogram");
    for (int i = 0; i < kEntropyBins && i < static_cast<int>(hist.size()); ++i)
      m.entropy_hist_[i] = hist[i].get<int>();
  }

  const std::string rows_kind = h.at("rows").get<std::string>();
  if (rows_kind == "jsonl") {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw DataError("model file: malformed row line");
      std::vector<TokenId> ctx = j.at("ctx").get<std::vector<TokenId>>();
      std::vector<double> row = j.at("p").get<std::vector<double>>();
      if (static_cast<int>(ctx.size()) != m.order_)
        throw DataError("model file: row context length != order");
      if (static_cast<int>(row.size()) != m.vocab_)
        throw DataError("model file: row length != vocab");
      m.explicit_rows_[hash_tokens(ctx)] = std::move(row);
    }
  } else if (rows_kind == "dense") {
    const std::string bin_name = h.at("rows_file").get<std::string>();
    const auto bin_path = path.parent_path() / bin_name;
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw DataError("cannot open dense blob: " + bin_path.string());
    std::size_t rows = 1;
    for (int i = 0; i < m.order_; ++i) rows *= static_cast<std::size_t>(m.vocab_);
    m.dense_.resize(rows * static_cast<std::size_t>(m.vocab_));
    bin.read(reinterpret_cast<char*>(m.dense_.data()),
             static_cast<std::streamsize>(m.dense_.size() * sizeof(double)));
    if (bin.gcount() != static_cast<std::streamsize>(m.dense_.size() * sizeof(double)))
      throw DataError("dense blob truncated: " + bin_path.string());
  } else if (rows_kind == "procedural") {
    if (!m.procedural_) throw DataError("model file: procedural rows require a spec");
    m.materialize(-1);
  } else {
    throw DataError("model file: unknown rows kind: " + rows_kind);
  }
  return m;
}

}  // namespace c2t
