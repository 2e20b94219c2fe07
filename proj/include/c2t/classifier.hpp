#pragma once

// Two-layer FFN confidence model over (P, H, d): sigmoid(W2*relu(W1*x+b1)+b2).
// Training is plain minibatch Adam on BCE with seeded shuffling and negative
// sampling, single-threaded so checkpoints reproduce bitwise.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "c2t/features.hpp"

namespace c2t {

struct MlpParams {
  int hidden = 48;
  std::vector<double> w1;  // hidden x 3, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // 1 x hidden
  double b2 = 0.0;
};

struct LabeledExample {
  FeatureVector features;
  int label = 0;
};

struct TrainConfig {
  int hidden = 48;
  double lr = 1e-3;
  int epochs = 10;
  int batch = 1024;
  int eval_batch = 0;    // 0 = one tree's worth (group size); metrics are global either way
  double split = 0.95;   // train fraction
  int neg_ratio = 10;    // negatives kept per positive
  std::uint64_t seed = 0;
  double beta = 0.5;     // threshold used for the per-epoch recall/theta curve
};

struct EvalStats {
  double recall = 0.0;  // NaN when the dataset has no positives
  double theta = 0.0;   // predicted-positive rate
  double loss = 0.0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_recall = 0.0;
  double val_theta = 0.0;
};

struct TrainResult {
  MlpParams params;
  std::vector<EpochStats> curve;
};

// Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
MlpParams init_params(int hidden, std::uint64_t seed);

double mlp_forward(const MlpParams& params, const FeatureVector& f);

// Splits train/val (by group when group ids are given, else by row), keeps
// every positive and neg_ratio negatives per positive on the train side,
// then runs Adam. Throws DataError when no positives survive or the loss
// goes non-finite.
TrainResult train(std::span<const LabeledExample> dataset, const TrainConfig& config,
                  std::span<const int> group_ids = {});

EvalStats evaluate(const MlpParams& params, std::span<const LabeledExample> dataset, double beta);

// Same loop as train with lr defaulting to 1e-4 and the data subsampled to
// `fraction` (by group when ids are given).
MlpParams fine_tune(const MlpParams& params, std::span<const LabeledExample> dataset,
                    const TrainConfig& config, double fraction = 0.10,
                    std::span<const int> group_ids = {},
                    std::vector<EpochStats>* curve = nullptr);

void save_params(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_params(const std::filesystem::path& path);

void write_curve_csv(std::span<const EpochStats> curve, const std::filesystem::path& path);

}  // namespace c2t
