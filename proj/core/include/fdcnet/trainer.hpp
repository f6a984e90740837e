#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "fdcnet/classifier.hpp"
#include "fdcnet/dataset.hpp"
#include "fdcnet/model.hpp"

namespace fdcnet {

struct TrainConfig {
  ModelConfig model = ModelConfig::desk();
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double alpha = 0.6;  // weight of the reconstruction term
  double snr_start = 3.0;
  double snr_end = -3.0;
  double split = 0.8;  // train fraction
  bool split_by_subject = false;
  double emg_eog_ratio = 1.0;
  double gaussian_sigma = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

// Linear ramp from start (epoch 0) to end (last epoch); start when total < 2.
double curriculum_snr(std::size_t epoch, std::size_t total, double start = 3.0, double end = -3.0);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Membership of segment i depends only on (i, seed), or on (subject, seed)
// when by_subject is set. DegenerateError if either side comes out empty.
Split split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed, bool by_subject = false);

// Fresh artifact realization for one segment at the given SNR.
Tensor renoise(const EegSegment& seg, double snr_db, double emg_eog_ratio, double sigma, std::uint64_t seed);

struct EpochLog {
  std::size_t epoch = 0;
  double snr_db = 0.0;
  double loss_total = 0.0;  // sample-weighted means over the epoch
  double loss_mse = 0.0;
  double loss_cls = 0.0;
  double val_acc = 0.0;
  double val_cc = 0.0;  // percent
};

struct TrainResult {
  FdcNet model;
  std::vector<EpochLog> log;
  Split split;
  classifier::ClassWeights weights;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Per epoch: re-inject noise at the scheduled SNR, shuffle, minibatch AdamW on
// the joint loss, then validate on the test split. A non-finite value aborts
// with NonFiniteError naming the epoch, batch and offending op or path.
TrainResult train(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

void write_train_log(std::ostream& os, const std::vector<EpochLog>& log);
void write_train_log(const std::filesystem::path& file, const std::vector<EpochLog>& log);

struct EvalRow {
  double input_snr_db = 0.0;
  double output_snr_db = 0.0;
  double cc_pct = 0.0;
  double mse = 0.0;
  double acc4 = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  EvalRow mean;  // column-wise arithmetic mean of rows
};

std::vector<double> default_snr_grid();

struct EvalOptions {
  double emg_eog_ratio = 1.0;
  double gaussian_sigma = 0.01;
  std::size_t batch_size = 64;
};

// Grid points are evaluated independently (in parallel when threads allow).
// Output metrics are per-segment means; input_snr_db is the grid target.
EvalReport evaluate(FdcNet& model, const Dataset& data, const std::vector<std::size_t>& indices,
                    const std::vector<double>& snr_grid, std::uint64_t eval_seed, const EvalOptions& opt = {});

// kind,input_snr_db,output_snr_db,cc_pct,mse,acc4 with kind in {grid, mean}.
void write_eval_csv(std::ostream& os, const EvalReport& report);
void write_eval_csv(const std::filesystem::path& file, const EvalReport& report);
// FormatError with the 1-based line number on malformed input.
EvalReport read_eval_csv(std::istream& is);
EvalReport read_eval_csv(const std::filesystem::path& file);

}  // namespace fdcnet
