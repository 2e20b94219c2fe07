#include "c2t/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "c2t/csvio.hpp"
#include "c2t/errors.hpp"
#include "c2t/rng.hpp"

namespace c2t {

namespace {

constexpr double kBceClamp = 1e-7;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double bce(double yhat, double y) {
  const double p = std::clamp(yhat, kBceClamp, 1.0 - kBceClamp);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

struct Gradients {
  std::vector<double> w1, b1, w2;
  double b2 = 0.0;
  void reset(int hidden) {
    w1.assign(static_cast<std::size_t>(hidden) * 3, 0.0);
    b1.assign(hidden, 0.0);
    w2.assign(hidden, 0.0);
    b2 = 0.0;
  }
};

// Forward + backward for one example; returns the clamped BCE loss.
double backprop(const MlpParams& p, const FeatureVector& f, double y, Gradients& g,
                std::vector<double>& z1) {
  const double x[3] = {f.P, f.H, f.d};
  const int h = p.hidden;
  z1.resize(h);
  double z2 = p.b2;
  for (int j = 0; j < h; ++j) {
    double z = p.b1[j];
    for (int k = 0; k < 3; ++k) z += p.w1[j * 3 + k] * x[k];
    z1[j] = z;
    if (z > 0.0) z2 += p.w2[j] * z;
  }
  const double yhat = sigmoid(z2);
  const double dz2 = yhat - y;
  g.b2 += dz2;
  for (int j = 0; j < h; ++j) {
    if (z1[j] > 0.0) {
      g.w2[j] += dz2 * z1[j];
      const double dz1 = dz2 * p.w2[j];
      g.b1[j] += dz1;
      for (int k = 0; k < 3; ++k) g.w1[j * 3 + k] += dz1 * x[k];
    }
  }
  return bce(yhat, y);
}

class Adam {
 public:
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kAdamBeta1, t_);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kAdamBeta1 * m_[i] + (1.0 - kAdamBeta1) * grads[i];
      v_[i] = kAdamBeta2 * v_[i] + (1.0 - kAdamBeta2) * grads[i] * grads[i];
      params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kAdamEps);
    }
  }

 private:
  std::vector<double> m_, v_;
  int t_ = 0;
};

// Flatten params into one span-addressable block for the optimizer.
struct FlatParams {
  std::vector<double> data;
  int hidden;

  explicit FlatParams(const MlpParams& p) : hidden(p.hidden) {
    data.reserve(p.w1.size() + p.b1.size() + p.w2.size() + 1);
    data.insert(data.end(), p.w1.begin(), p.w1.end());
    data.insert(data.end(), p.b1.begin(), p.b1.end());
    data.insert(data.end(), p.w2.begin(), p.w2.end());
    data.push_back(p.b2);
  }

  MlpParams unflatten() const {
    MlpParams p;
    p.hidden = hidden;
    auto it = data.begin();
    p.w1.assign(it, it + hidden * 3);
    it += hidden * 3;
    p.b1.assign(it, it + hidden);
    it += hidden;
    p.w2.assign(it, it + hidden);
    it += hidden;
    p.b2 = *it;
    return p;
  }
};

// Split row indices into train/val, grouped when group ids are present so a
// tree's rows never straddle the split.
void split_indices(std::size_t n, std::span<const int> group_ids, double ratio,
                   std::uint64_t seed, std::vector<std::size_t>& train,
                   std::vector<std::size_t>& val) {
  train.clear();
  val.clear();
  if (group_ids.empty()) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(idx);
    std::size_t n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    train.assign(idx.begin(), idx.begin() + n_train);
    val.assign(idx.begin() + n_train, idx.end());
    return;
  }
  std::vector<int> groups;
  for (int g : group_ids)
    if (groups.empty() || std::find(groups.begin(), groups.end(), g) == groups.end())
      groups.push_back(g);
  if (groups.size() < 2) throw DataError("split: fewer than 2 groups");
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(groups);
  std::size_t n_train_groups =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(groups.size()) + 0.5));
  n_train_groups = std::clamp<std::size_t>(n_train_groups, 1, groups.size() - 1);
  std::vector<bool> in_train_group;
  {
    const int max_g = *std::max_element(groups.begin(), groups.end());
    in_train_group.assign(static_cast<std::size_t>(max_g) + 1, false);
    for (std::size_t i = 0; i < n_train_groups; ++i) in_train_group[groups[i]] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (in_train_group[group_ids[i]])
      train.push_back(i);
    else
      val.push_back(i);
  }
}

TrainResult train_loop(MlpParams start, std::span<const LabeledExample> dataset,
                       const TrainConfig& config, std::span<const int> group_ids) {
  if (dataset.empty()) throw DataError("train: empty dataset");
  if (!group_ids.empty() && group_ids.size() != dataset.size())
    throw DataError("train: group id count != dataset size");
  if (!(config.lr > 0.0)) throw DataError("train: lr must be > 0");
  if (config.epochs < 0) throw DataError("train: epochs must be >= 0");
  if (config.neg_ratio < 1) throw DataError("train: neg_ratio must be >= 1");

  std::vector<std::size_t> train_idx, val_idx;
  split_indices(dataset.size(), group_ids, config.split, config.seed, train_idx, val_idx);

  // Negative sampling on the train side only; positives are all kept.
  std::vector<std::size_t> pos, neg;
  for (std::size_t i : train_idx)
    (dataset[i].label ? pos : neg).push_back(i);
  if (pos.empty()) throw DataError("train: no positive examples in the training split");
  {
    Rng rng(derive_seed(config.seed, "negsample"));
    rng.shuffle(neg);
    const std::size_t keep = std::min<std::size_t>(
        neg.size(), static_cast<std::size_t>(config.neg_ratio) * pos.size());
    neg.resize(keep);
  }
  std::vector<std::size_t> work = pos;
  work.insert(work.end(), neg.begin(), neg.end());
  std::sort(work.begin(), work.end());

  std::vector<LabeledExample> val;
  val.reserve(val_idx.size());
  for (std::size_t i : val_idx) val.push_back(dataset[i]);

  TrainResult result;
  result.params = std::move(start);
  FlatParams flat(result.params);
  Adam adam(flat.data.size());
  const int batch = std::max(1, config.batch);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(work);

    MlpParams cur = flat.unflatten();
    Gradients grads;
    std::vector<double> z1;
    double loss_sum = 0.0;
    std::size_t off = 0;
    while (off < work.size()) {
      const std::size_t end = std::min(off + static_cast<std::size_t>(batch), work.size());
      const double inv = 1.0 / static_cast<double>(end - off);
      grads.reset(cur.hidden);
      for (std::size_t i = off; i < end; ++i) {
        const LabeledExample& ex = dataset[work[i]];
        loss_sum += backprop(cur, ex.features, static_cast<double>(ex.label), grads, z1);
      }
      std::vector<double> g;
      g.reserve(flat.data.size());
      g.insert(g.end(), grads.w1.begin(), grads.w1.end());
      g.insert(g.end(), grads.b1.begin(), grads.b1.end());
      g.insert(g.end(), grads.w2.begin(), grads.w2.end());
      g.push_back(grads.b2);
      for (double& x : g) x *= inv;
      adam.step(flat.data, g, config.lr);
      cur = flat.unflatten();
      off = end;
    }

    const double train_loss = loss_sum / static_cast<double>(work.size());
    if (!std::isfinite(train_loss))
      throw DataError("train: non-finite loss at epoch " + std::to_string(epoch) +
                      " (lr=" + fmt_double(config.lr) + ", batch=" + std::to_string(batch) + ")");

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = train_loss;
    if (!val.empty()) {
      const EvalStats vs = evaluate(cur, val, config.beta);
      es.val_loss = vs.loss;
      es.val_recall = vs.recall;
      es.val_theta = vs.theta;
    }
    result.curve.push_back(es);
  }

  result.params = flat.unflatten();
  return result;
}

}  // namespace

MlpParams init_params(int hidden, std::uint64_t seed) {
  if (hidden < 1) throw DataError("init_params: hidden must be >= 1");
  MlpParams p;
  p.hidden = hidden;
  Rng rng(derive_seed(seed, "init"));
  auto uniform = [&](double bound) { return (2.0 * rng.u01() - 1.0) * bound; };
  const double bound1 = 1.0 / std::sqrt(3.0);
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  p.w1.resize(static_cast<std::size_t>(hidden) * 3);
  p.b1.resize(hidden);
  p.w2.resize(hidden);
  for (auto& w : p.w1) w = uniform(bound1);
  for (auto& b : p.b1) b = uniform(bound1);
  for (auto& w : p.w2) w = uniform(bound2);
  p.b2 = uniform(bound2);
  return p;
}

double mlp_forward(const MlpParams& params, const FeatureVector& f) {
  if (!std::isfinite(f.P) || !std::isfinite(f.H) || !std::isfinite(f.d))
    throw DataError("mlp_forward: non-finite feature");
  const double x[3] = {f.P, f.H, f.d};
  double z2 = params.b2;
  for (int j = 0; j < params.hidden; ++j) {
    double z = params.b1[j];
    for (int k = 0; k < 3; ++k) z += params.w1[j * 3 + k] * x[k];
    if (z > 0.0) z2 += params.w2[j] * z;
  }
  return sigmoid(z2);
}

TrainResult train(std::span<const LabeledExample> dataset, const TrainConfig& config,
                  std::span<const int> group_ids) {
  MlpParams init = init_params(config.hidden, config.seed);
  return train_loop(std::move(init), dataset, config, group_ids);
}

EvalStats evaluate(const MlpParams& params, std::span<const LabeledExample> dataset, double beta) {
  if (dataset.empty()) throw DataError("evaluate: empty dataset");
  std::size_t tp = 0, fn = 0, pred_pos = 0;
  double loss_sum = 0.0;
  for (const LabeledExample& ex : dataset) {
    const double c = mlp_forward(params, ex.features);
    const bool pred = c > beta;
    if (pred) ++pred_pos;
    if (ex.label) {
      if (pred)
        ++tp;
      else
        ++fn;
    }
    loss_sum += bce(c, static_cast<double>(ex.label));
  }
  EvalStats s;
  s.recall = (tp + fn) == 0 ? std::numeric_limits<double>::quiet_NaN()
                            : static_cast<double>(tp) / static_cast<double>(tp + fn);
  s.theta = static_cast<double>(pred_pos) / static_cast<double>(dataset.size());
  s.loss = loss_sum / static_cast<double>(dataset.size());
  return s;
}

MlpParams fine_tune(const MlpParams& params, std::span<const LabeledExample> dataset,
                    const TrainConfig& config, double fraction, std::span<const int> group_ids,
                    std::vector<EpochStats>* curve) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw DataError("fine_tune: fraction out of [0,1]");
  if (fraction == 0.0) return params;

  std::vector<LabeledExample> subset;
  std::vector<int> subset_groups;
  Rng rng(derive_seed(config.seed, "finetune-sample"));
  if (group_ids.empty()) {
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    const std::size_t keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(dataset.size()))));
    idx.resize(std::min(keep, idx.size()));
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) subset.push_back(dataset[i]);
  } else {
    std::vector<int> groups;
    for (int g : group_ids)
      if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    rng.shuffle(groups);
    const std::size_t keep = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(groups.size()))));
    groups.resize(std::min(keep, groups.size()));
    std::vector<bool> in;
    const int max_g = *std::max_element(group_ids.begin(), group_ids.end());
    in.assign(static_cast<std::size_t>(max_g) + 1, false);
    for (int g : groups) in[g] = true;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (in[group_ids[i]]) {
        subset.push_back(dataset[i]);
        subset_groups.push_back(group_ids[i]);
      }
    }
  }

  TrainResult r = train_loop(params, subset, config, subset_groups);
  if (curve) *curve = r.curve;
  return r.params;
}

void save_params(const MlpParams& params, const std::filesystem::path& path) {
  nlohmann::json j;
  j["hidden"] = params.hidden;
  j["W1"] = params.w1;
  j["b1"] = params.b1;
  j["W2"] = params.w2;
  j["b2"] = params.b2;
  j["feature_order"] = {"P", "H", "d"};
  j["log_base"] = "e";
  write_text_file(path, j.dump() + "\n");
}

MlpParams load_params(const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw DataError("classifier checkpoint: malformed JSON: " + path.string());
  MlpParams p;
  try {
    p.hidden = j.at("hidden").get<int>();
    p.w1 = j.at("W1").get<std::vector<double>>();
    p.b1 = j.at("b1").get<std::vector<double>>();
    p.w2 = j.at("W2").get<std::vector<double>>();
    p.b2 = j.at("b2").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("classifier checkpoint: missing field: ") + e.what());
  }
  if (p.hidden < 1) throw DataError("classifier checkpoint: hidden must be >= 1");
  auto expect = [&](const char* name, std::size_t got, std::size_t want) {
    if (got != want)
      throw DataError(std::string("classifier checkpoint: ") + name + " has length " +
                      std::to_string(got) + ", expected " + std::to_string(want) + " (hidden=" +
                      std::to_string(p.hidden) + " x 3 features)");
  };
  expect("W1", p.w1.size(), static_cast<std::size_t>(p.hidden) * 3);
  expect("b1", p.b1.size(), static_cast<std::size_t>(p.hidden));
  expect("W2", p.w2.size(), static_cast<std::size_t>(p.hidden));
  return p;
}

void write_curve_csv(std::span<const EpochStats> curve, const std::filesystem::path& path) {
  std::ostringstream ss;
  ss << "epoch,train_loss,val_loss,val_recall,val_theta\n";
  for (const EpochStats& e : curve) {
    ss << e.epoch << ',' << fmt_double(e.train_loss) << ',' << fmt_double(e.val_loss) << ','
       << fmt_double(e.val_recall) << ',' << fmt_double(e.val_theta) << "\n";
  }
  write_text_file(path, ss.str());
}

}  // namespace c2t
