#include "fdcnet/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "fdcnet/errors.hpp"
#include "fdcnet/optim.hpp"
#include "fdcnet/parallel.hpp"
#include "fdcnet/rng.hpp"

namespace fdcnet {
namespace {

constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;
constexpr std::uint64_t kTrainNoiseStream = 4;
constexpr std::uint64_t kValNoiseStream = 5;
constexpr std::uint64_t kSplitStream = 6;

std::uint64_t snr_key(double snr_db) { return std::bit_cast<std::uint64_t>(snr_db); }

Tensor stack(const std::vector<const Tensor*>& items) {
  const Shape& s = items.front()->shape();
  const std::size_t n = items.front()->numel();
  std::vector<double> out(items.size() * n);
  for (std::size_t b = 0; b < items.size(); ++b) std::copy_n(items[b]->data().begin(), n, out.begin() + b * n);
  return Tensor({items.size(), s[0], s[1]}, std::move(out));
}

std::vector<classifier::Label> labels_of(const Dataset& data, std::span<const std::size_t> idx) {
  std::vector<classifier::Label> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back({data.segments[i].valence, data.segments[i].arousal});
  return out;
}

void check_gradients(ParamStore& store) {
  for (const auto& [path, p] : store.params()) {
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in parameter '" + path + "'");
    }
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Accum {
  double out_snr = 0.0, cc = 0.0, mse = 0.0;
  std::size_t hits = 0, count = 0;
};

// Eval-mode pass over `idx` with precomputed noisy inputs.
Accum score(FdcNet& model, const Dataset& data, std::span<const std::size_t> idx, const std::vector<Tensor>& noisy,
            std::size_t batch_size) {
  NoGradGuard guard;
  Accum acc;
  const nn::Mode mode{};
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, idx.size() - start);
    std::vector<const Tensor*> xs;
    for (std::size_t k = 0; k < len; ++k) xs.push_back(&noisy[start + k]);
    const auto out = model.forward(stack(xs), mode);
    const std::size_t n = data.channels * data.samples;
    const auto xh = out.x_hat.data();
    for (std::size_t k = 0; k < len; ++k) {
      const auto clean = data.segments[idx[start + k]].clean.data();
      const auto den = xh.subspan(k * n, n);
      acc.out_snr += signal::metric_snr(clean, den);
      acc.cc += 100.0 * signal::metric_cc(clean, den);
      acc.mse += signal::metric_mse(clean, den);
    }
    const auto y = classifier::label_tensor(labels_of(data, idx.subspan(start, len)));
    acc.hits += static_cast<std::size_t>(std::llround(classifier::accuracy_4class(out.pred.p, y) * len));
    acc.count += len;
  }
  return acc;
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(snr_start >= snr_end)) throw ConfigError("snr_start must be >= snr_end");
  if (!(split > 0.0 && split < 1.0)) throw ConfigError("split must lie in (0, 1)");
  if (!(emg_eog_ratio >= 0.0)) throw ConfigError("emg_eog_ratio must be non-negative");
  if (!(gaussian_sigma >= 0.0)) throw ConfigError("gaussian_sigma must be non-negative");
}

double curriculum_snr(std::size_t epoch, std::size_t total, double start, double end) {
  if (total < 2) return start;
  if (epoch >= total) throw ContractError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total) + ")");
  if (epoch + 1 == total) return end;
  return start + (end - start) * static_cast<double>(epoch) / static_cast<double>(total - 1);
}

Split split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed, bool by_subject) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("split must lie in (0, 1)");
  Split s;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint64_t key = by_subject ? data.segments[i].subject_id : i;
    Rng rng(derive_seed(seed, kSplitStream, key));
    (rng.uniform() < train_fraction ? s.train : s.test).push_back(i);
  }
  if (s.train.empty() || s.test.empty()) {
    throw DegenerateError("split leaves an empty " + std::string(s.train.empty() ? "train" : "test") + " side");
  }
  return s;
}

Tensor renoise(const EegSegment& seg, double snr_db, double emg_eog_ratio, double sigma, std::uint64_t seed) {
  signal::NoiseSpec spec;
  spec.target_snr_db = snr_db;
  spec.emg_eog_ratio = emg_eog_ratio;
  spec.gaussian_sigma = sigma;
  spec.seed = seed;
  return signal::inject_noise(seg.clean, spec).noisy;
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.size() == 0) throw ContractError("training set is empty");
  if (data.channels != cfg.model.channels) {
    throw ConfigError("dataset has " + std::to_string(data.channels) + " channels, model expects " +
                      std::to_string(cfg.model.channels));
  }

  TrainResult result{FdcNet(cfg.model, derive_seed(cfg.seed, kModelStream)), {}, {}, {}};
  FdcNet& model = result.model;
  result.split = split_dataset(data, cfg.split, cfg.seed, cfg.split_by_subject);
  const auto& train_idx = result.split.train;
  const auto& test_idx = result.split.test;
  result.weights = classifier::class_weights(labels_of(data, train_idx));

  AdamWConfig ac;
  ac.lr = cfg.lr;
  ac.weight_decay = cfg.weight_decay;
  AdamW opt(model.store().params(), ac);
  Rng dropout_rng(derive_seed(cfg.seed, kDropoutStream));
  const std::uint64_t train_noise = derive_seed(cfg.seed, kTrainNoiseStream);
  const std::uint64_t val_noise = derive_seed(cfg.seed, kValNoiseStream);

  std::vector<Tensor> noisy(data.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double snr = curriculum_snr(epoch, cfg.epochs, cfg.snr_start, cfg.snr_end);
    parallel_for(train_idx.size(), [&](std::size_t k) {
      const std::size_t i = train_idx[k];
      noisy[i] = renoise(data.segments[i], snr, cfg.emg_eog_ratio, cfg.gaussian_sigma, derive_seed(train_noise, epoch, i));
    });

    std::vector<std::size_t> order = train_idx;
    Rng shuffle(derive_seed(cfg.seed, kShuffleStream, epoch));
    shuffle.shuffle(std::span<std::size_t>(order));

    EpochLog row;
    row.epoch = epoch;
    row.snr_db = snr;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      try {
        std::vector<const Tensor*> xs, cs;
        for (auto i : idx) {
          xs.push_back(&noisy[i]);
          cs.push_back(&data.segments[i].clean);
        }
        const Tensor y = classifier::label_tensor(labels_of(data, idx));
        GradTape::active().clear();
        const auto out = model.forward(stack(xs), nn::Mode{true, &dropout_rng});
        const auto loss = feedback::joint_loss(stack(cs), out.x_hat, out.pred.p, y, result.weights, cfg.alpha);
        backward(loss.total);
        check_gradients(model.store());
        opt.step();
        opt.zero_grad();
        const double w = static_cast<double>(len);
        row.loss_total += w * loss.total.item();
        row.loss_mse += w * loss.mse.item();
        row.loss_cls += w * loss.cls.item();
      } catch (const NonFiniteError& e) {
        GradTape::active().clear();
        throw NonFiniteError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch) + ": " + e.what());
      }
    }
    const double n = static_cast<double>(order.size());
    row.loss_total /= n;
    row.loss_mse /= n;
    row.loss_cls /= n;

    std::vector<Tensor> val(test_idx.size());
    parallel_for(test_idx.size(), [&](std::size_t k) {
      const std::size_t i = test_idx[k];
      val[k] = renoise(data.segments[i], snr, cfg.emg_eog_ratio, cfg.gaussian_sigma, derive_seed(val_noise, epoch, i));
    });
    const Accum a = score(model, data, test_idx, val, 64);
    row.val_acc = static_cast<double>(a.hits) / static_cast<double>(a.count);
    row.val_cc = a.cc / static_cast<double>(a.count);

    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return result;
}

void write_train_log(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,snr_db,loss_total,loss_mse,loss_cls,val_acc,val_cc\n";
  for (const auto& r : log) {
    os << r.epoch << ',' << fmt(r.snr_db) << ',' << fmt(r.loss_total) << ',' << fmt(r.loss_mse) << ','
       << fmt(r.loss_cls) << ',' << fmt(r.val_acc) << ',' << fmt(r.val_cc) << '\n';
  }
}

void write_train_log(const std::filesystem::path& file, const std::vector<EpochLog>& log) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw FormatError("cannot open " + file.string() + " for writing");
  write_train_log(os, log);
}

std::vector<double> default_snr_grid() { return {-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0}; }

EvalReport evaluate(FdcNet& model, const Dataset& data, const std::vector<std::size_t>& indices,
                    const std::vector<double>& snr_grid, std::uint64_t eval_seed, const EvalOptions& opt) {
  if (snr_grid.empty()) throw ContractError("empty SNR grid");
  if (indices.empty()) throw ContractError("empty evaluation set");
  if (opt.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (data.channels != model.config().channels) throw ConfigError("dataset channel count does not match the model");
  for (auto i : indices) {
    if (i >= data.size()) throw ContractError("segment index " + std::to_string(i) + " out of range");
  }

  EvalReport report;
  report.rows.resize(snr_grid.size());
  parallel_for(snr_grid.size(), [&](std::size_t g) {
    const double snr = snr_grid[g];
    std::vector<Tensor> noisy;
    noisy.reserve(indices.size());
    for (auto i : indices) {
      noisy.push_back(renoise(data.segments[i], snr, opt.emg_eog_ratio, opt.gaussian_sigma,
                              derive_seed(eval_seed, snr_key(snr), i)));
    }
    const Accum a = score(model, data, indices, noisy, opt.batch_size);
    const double n = static_cast<double>(a.count);
    report.rows[g] = {snr, a.out_snr / n, a.cc / n, a.mse / n, static_cast<double>(a.hits) / n};
  });

  const double k = static_cast<double>(report.rows.size());
  for (const auto& r : report.rows) {
    report.mean.input_snr_db += r.input_snr_db;
    report.mean.output_snr_db += r.output_snr_db;
    report.mean.cc_pct += r.cc_pct;
    report.mean.mse += r.mse;
    report.mean.acc4 += r.acc4;
  }
  report.mean.input_snr_db /= k;
  report.mean.output_snr_db /= k;
  report.mean.cc_pct /= k;
  report.mean.mse /= k;
  report.mean.acc4 /= k;
  return report;
}

void write_eval_csv(std::ostream& os, const EvalReport& report) {
  auto line = [&](const char* kind, const EvalRow& r) {
    os << kind << ',' << fmt(r.input_snr_db) << ',' << fmt(r.output_snr_db) << ',' << fmt(r.cc_pct) << ','
       << fmt(r.mse) << ',' << fmt(r.acc4) << '\n';
  };
  os << "kind,input_snr_db,output_snr_db,cc_pct,mse,acc4\n";
  for (const auto& r : report.rows) line("grid", r);
  line("mean", report.mean);
}

void write_eval_csv(const std::filesystem::path& file, const EvalReport& report) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw FormatError("cannot open " + file.string() + " for writing");
  write_eval_csv(os, report);
}

EvalReport read_eval_csv(std::istream& is) {
  EvalReport report;
  bool have_mean = false;
  std::string text;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> FormatError {
    return FormatError("line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(is, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (line_no == 1) {
      if (text != "kind,input_snr_db,output_snr_db,cc_pct,mse,acc4") throw fail("unexpected header");
      continue;
    }
    if (text.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(text);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) throw fail("expected 6 fields, got " + std::to_string(cells.size()));
    double v[5];
    for (int c = 0; c < 5; ++c) {
      const std::string& s = cells[c + 1];
      char* end = nullptr;
      v[c] = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0' || !std::isfinite(v[c])) throw fail("bad number '" + s + "'");
    }
    const EvalRow row{v[0], v[1], v[2], v[3], v[4]};
    if (cells[0] == "grid") {
      if (have_mean) throw fail("grid row after mean row");
      report.rows.push_back(row);
    } else if (cells[0] == "mean") {
      if (have_mean) throw fail("duplicate mean row");
      report.mean = row;
      have_mean = true;
    } else {
      throw fail("unknown row kind '" + cells[0] + "'");
    }
  }
  if (line_no == 0) throw FormatError("line 1: empty file");
  if (report.rows.empty()) throw FormatError("line " + std::to_string(line_no) + ": no grid rows");
  if (!have_mean) throw FormatError("line " + std::to_string(line_no) + ": missing mean row");
  return report;
}

EvalReport read_eval_csv(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw FormatError("cannot open " + file.string());
  return read_eval_csv(is);
}

}  // namespace fdcnet
