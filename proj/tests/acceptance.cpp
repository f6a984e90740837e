// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any
// failure. The desk-scale training run dominates the runtime (a few minutes).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "fdcnet/dataset.hpp"
#include "fdcnet/eegsp.hpp"
#include "fdcnet/feedback.hpp"
#include "fdcnet/ops.hpp"
#include "fdcnet/optim.hpp"
#include "fdcnet/trainer.hpp"
#include "fdcnet_cli/cli.hpp"
#include "model_checks.hpp"
#include "op_checks.hpp"

using namespace fdcnet;
using namespace fdcnet::testing;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Line {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

void emit(const char* name, Line& line) {
  std::printf("%s %s: %s\n", line.pass ? "PASS" : "FAIL", name, line.detail.str().c_str());
  std::fflush(stdout);
  if (!line.pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void documented_limits() {
  Line line;
  const auto readme = slurp(fs::path(FDCNET_SOURCE_DIR) / "README.md");
  line.require(!readme.empty(), "README.md present");
  line.require(readme.find("DEAP") != std::string::npos && readme.find("DREAMER") != std::string::npos,
               "README names DEAP and DREAMER");
  line.require(readme.find("not reproducible") != std::string::npos, "README states results are not reproducible");
  line.detail << "README documents that DEAP/DREAMER-scale numbers cannot be reproduced; property suites substitute";
  emit("dataset-scale-results-documented", line);
}

void gradient_suite() {
  Line line;
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = model_gradient_suite();
  const auto ops = op_gradient_suite();
  const double secs = seconds_since(t0);
  double worst_op = 0.0;
  std::string worst_name;
  for (const auto& c : ops) {
    if (c.rel_err >= worst_op) {
      worst_op = c.rel_err;
      worst_name = c.op;
    }
  }
  line.require(model.worst() < 1e-3, "model rel err < 1e-3");
  line.require(worst_op < 1e-5, "op rel err < 1e-5");
  line.require(secs < 60.0, "runtime < 60 s");
  line.detail << model.params.size() << " parameter tensors, worst rel err " << model.worst() << "; " << ops.size()
              << " ops, worst " << worst_op << " (" << worst_name << "); " << secs << " s";
  emit("gradient-suite", line);
}

void dct_suite() {
  Line line;
  Rng rng(3);
  double worst_rt = 0.0, worst_parseval = 0.0, worst_oracle = 0.0;
  for (std::size_t T : {1, 2, 4, 5, 8, 128}) {
    auto x = random_tensor({3, T}, rng, 1.0, false);
    const auto X = ops::dct_forward(x);
    const auto back = ops::dct_inverse(X);
    for (std::size_t i = 0; i < x.numel(); ++i) worst_rt = std::max(worst_rt, std::abs(back[i] - x[i]));
    for (std::size_t r = 0; r < 3; ++r) {
      double ex = 0.0, eX = 0.0;
      for (std::size_t n = 0; n < T; ++n) {
        ex += x[r * T + n] * x[r * T + n];
        eX += X[r * T + n] * X[r * T + n];
      }
      worst_parseval = std::max(worst_parseval, std::abs(ex - eX) / std::max(1.0, ex));
      if (T > 8) continue;
      for (std::size_t k = 0; k < T; ++k) {
        double acc = 0.0;
        for (std::size_t n = 0; n < T; ++n)
          acc += x[r * T + n] * std::cos(std::numbers::pi * (static_cast<double>(n) + 0.5) * static_cast<double>(k) /
                                         static_cast<double>(T));
        acc *= std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(T));
        worst_oracle = std::max(worst_oracle, std::abs(acc - X[r * T + k]));
      }
    }
  }
  line.require(worst_rt < 1e-10, "round trip < 1e-10");
  line.require(worst_parseval < 1e-10, "Parseval < 1e-10");
  line.require(worst_oracle < 1e-12, "direct summation < 1e-12");
  line.detail << "round trip " << worst_rt << ", Parseval " << worst_parseval << ", direct sum (T<=8) "
              << worst_oracle;
  emit("dct-suite", line);
}

void noise_injection() {
  Line line;
  Rng rng(5);
  double worst_clean = 0.0, worst_artifact = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double target = static_cast<double>(i % 7) - 3.0;
    const double amp = std::exp(rng.uniform(-2.0, 3.0));
    auto clean = random_tensor({4, 128}, rng, amp, false);
    signal::NoiseSpec spec;
    spec.target_snr_db = target;
    spec.seed = 1000 + static_cast<std::uint64_t>(i);
    spec.gaussian_sigma = 0.0;
    const auto flat = signal::inject_noise(clean, spec);
    double ps = 0.0, pn = 0.0;
    for (std::size_t k = 0; k < clean.numel(); ++k) {
      ps += clean[k] * clean[k];
      pn += (flat.noisy[k] - clean[k]) * (flat.noisy[k] - clean[k]);
    }
    worst_clean = std::max(worst_clean, std::abs(10.0 * std::log10(ps / pn) - target));

    spec.gaussian_sigma = 0.01;
    const auto floor = signal::inject_noise(clean, spec);
    double pa = 0.0;
    for (double a : floor.artifact.data()) pa += a * a;
    worst_artifact = std::max(worst_artifact, std::abs(10.0 * std::log10(ps / pa) - target));
    worst_artifact = std::max(worst_artifact, std::abs(floor.achieved_snr_db - target));
  }
  line.require(worst_clean < 0.05, "sigma=0 within 0.05 dB");
  line.require(worst_artifact < 0.05, "sigma=0.01 artifact within 0.05 dB");
  line.detail << "100 signals, targets -3..3 dB: worst |error| " << worst_clean << " dB (sigma=0), "
              << worst_artifact << " dB (artifact only, sigma=0.01)";
  emit("noise-injection-oracle", line);
}

Dataset desk_dataset() {
  signal::SynthSpec s;
  s.n_subjects = 10;
  s.trials_per_subject = 20;
  s.channels = 8;
  s.label_effect = 0.5;
  s.seed = 42;
  signal::NoiseSpec n;
  n.seed = 43;
  return build_dataset(signal::synth_clean_eeg(s), n);
}

void residual_identity(const Dataset& data) {
  Line line;
  bool exact = true;
  for (auto cfg : {ModelConfig::desk(), tiny_config()}) {
    FdcNet net(cfg, 9);
    Rng rng(4);
    auto x = random_tensor({3, cfg.channels, 128}, rng, 5.0, false);
    NoGradGuard guard;
    exact = exact && bit_equal(net.forward(x, {}).x_hat, x);
  }
  FdcNet identity(ModelConfig::desk(), 9);
  const auto idx = split_dataset(data, 0.8, 7).test;
  const auto rep = evaluate(identity, data, idx, default_snr_grid(), 99);
  double worst = 0.0;
  for (const auto& r : rep.rows) worst = std::max(worst, std::abs(r.output_snr_db - r.input_snr_db));
  line.require(exact, "x_hat bit-equal to x_noisy");
  line.require(worst < 0.05, "identity eval within 0.05 dB");
  line.detail << "zero decoder reproduces input bit-exactly; identity eval over " << rep.rows.size()
              << " grid points, worst |out - in| " << worst << " dB";
  emit("residual-identity", line);
}

void ranges_and_simplex() {
  Line line;
  Rng rng(8);
  const std::size_t d = 8;
  std::size_t n_mult = 0;
  double lo = 2.0, hi = 1.0;
  while (n_mult < 1000000) {
    auto f = random_tensor({500, d}, rng, 1.0, false);
    auto w = random_tensor({d, d}, rng, 1.0 / std::sqrt(static_cast<double>(d)), false);
    auto b = random_tensor({d}, rng, 1.0, false);
    const auto m = feedback::enhancement_multiplier(f, w, b);
    for (double v : m.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    n_mult += 500 * d;
  }
  double glo = 1.0, ghi = 0.0;
  for (int i = 0; i < 2000; ++i) {
    auto z = random_tensor({4, 16}, rng, 1.0, false);
    auto w1 = random_tensor({4, 16}, rng, 0.25, false), b1 = random_tensor({4}, rng, 1.0, false);
    auto w2 = random_tensor({16, 4}, rng, 0.5, false), b2 = random_tensor({16}, rng, 1.0, false);
    const auto g = eegsp::channel_gate_weights(z, w1, b1, w2, b2);
    for (double v : g.data()) {
      glo = std::min(glo, v);
      ghi = std::max(ghi, v);
    }
  }
  auto logits = random_tensor({eegsp::kBandCount}, rng);
  std::map<std::string, Tensor> params{{"encoder.pe.alpha_logits", logits}};
  AdamWConfig ac;
  ac.lr = 0.05;
  AdamW opt(params, ac);
  auto target = random_tensor({8, 8}, rng, 1.0, false);
  double worst_sum = 0.0;
  for (int step = 0; step < 100; ++step) {
    backward(ops::mse_loss(eegsp::band_limited_pe(logits, 8, 8, 8), target));
    opt.step();
    opt.zero_grad();
    double s = 0.0;
    const auto alpha = ops::softmax_last(logits);
    for (double a : alpha.data()) s += a;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  line.require(lo > 1.0 && hi < 2.0, "multiplier in (1,2)");
  line.require(glo > 0.0 && ghi < 1.0, "gate in (0,1)");
  line.require(worst_sum < 1e-12, "simplex within 1e-12");
  line.detail << n_mult << " multipliers in [" << lo << ", " << hi << "]; gate in [" << glo << ", " << ghi
              << "]; |sum softmax - 1| <= " << worst_sum << " over 100 AdamW steps";
  emit("ranges-and-simplex", line);
}

void ablation_equivalence() {
  Line line;
  int cases = 0;
  for (auto cfg : {tiny_config(), ModelConfig::desk()}) {
    for (int variant = 0; variant < 4; ++variant) {
      auto c = cfg;
      c.t_fb = variant == 0 ? 1 : 2;
      c.no_feedback = variant >= 1;
      c.no_cross = variant >= 2;
      c.no_eegsp = variant == 3;
      line.require(ablation_equivalent(c, 21 + static_cast<std::uint64_t>(variant)), "bit-exact equivalence");
      ++cases;
    }
  }
  line.detail << cases << " configurations: joint forward equals single-path forwards bit-exactly";
  emit("ablation-equivalence", line);
}

void desk_end_to_end(const Dataset& data, std::vector<EpochLog>& log_out) {
  Line line;
  const auto t0 = std::chrono::steady_clock::now();
  TrainConfig cfg;
  cfg.seed = 7;
  auto result = train(data, cfg);
  const auto rep = evaluate(result.model, data, result.split.test, default_snr_grid(), 99);
  const double secs = seconds_since(t0);
  log_out = result.log;

  const double first = result.log.front().loss_total, last = result.log.back().loss_total;
  const EvalRow* at_end = nullptr;
  const EvalRow* at_zero = nullptr;
  for (const auto& r : rep.rows) {
    if (r.input_snr_db == cfg.snr_end) at_end = &r;
    if (r.input_snr_db == 0.0) at_zero = &r;
  }
  line.require(data.size() == 2000 && data.channels == 8, "2000 segments, 8 channels");
  line.require(last < first, "(a) final train loss < initial");
  line.require(at_end && at_end->acc4 > 0.60, "(b) test accuracy > 0.60");
  line.require(at_zero && at_zero->output_snr_db - at_zero->input_snr_db > 3.0, "(c) SNR gain > 3 dB at 0 dB");
  line.require(secs < 600.0, "runtime < 10 min");
  line.detail << "train loss " << first << " -> " << last;
  if (at_end) line.detail << "; test 4-class accuracy " << at_end->acc4 << " at " << cfg.snr_end << " dB";
  if (at_zero)
    line.detail << "; at 0 dB output SNR " << at_zero->output_snr_db << " dB (gain "
                << at_zero->output_snr_db - at_zero->input_snr_db << " dB), accuracy " << at_zero->acc4;
  line.detail << "; grid mean accuracy " << rep.mean.acc4 << ", CC " << rep.mean.cc_pct << "%; " << secs << " s";
  emit("desk-end-to-end", line);
}

void curriculum(const std::vector<EpochLog>& log) {
  Line line;
  bool monotone = true;
  for (std::size_t e = 1; e < 20; ++e) monotone = monotone && curriculum_snr(e, 20) <= curriculum_snr(e - 1, 20);
  for (std::size_t e = 1; e < log.size(); ++e) monotone = monotone && log[e].snr_db <= log[e - 1].snr_db;
  line.require(curriculum_snr(0, 20) == 3.0 && curriculum_snr(19, 20) == -3.0, "schedule endpoints exact");
  line.require(!log.empty() && log.front().snr_db == 3.0 && log.back().snr_db == -3.0, "training log endpoints");
  line.require(monotone, "monotone non-increasing");
  line.detail << "epoch 0 -> " << curriculum_snr(0, 20) << " dB, epoch 19 -> " << curriculum_snr(19, 20)
              << " dB, monotone over schedule and training log";
  emit("curriculum-endpoints", line);
}

std::map<std::string, std::string> pipeline_outputs(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const char* name) { return (dir / name).string(); };
  std::ostringstream out, err;
  const std::vector<std::vector<std::string>> steps = {
      {"synth", "--subjects", "2", "--trials", "4", "--channels", "8", "--seed", "11", "--out", p("data/d.fdcd")},
      {"train", "--data", p("data/d.fdcd"), "--epochs", "2", "--d-model", "16", "--heads", "2", "--freq-heads",
       "1", "--seed", "5", "--out", p("model/m.fdcn")},
      {"eval", "--model", p("model/m.fdcn"), "--data", p("data/d.fdcd"), "--seed", "5", "--snr-grid=-3:3:1",
       "--out", p("eval/e.csv")},
      {"denoise", "--model", p("model/m.fdcn"), "--data", p("data/d.fdcd"), "--out", p("den/d.fdcd")},
      {"report", p("eval/e.csv"), "--out-dir", p("report")},
  };
  std::map<std::string, std::string> files;
  for (const auto& args : steps) {
    if (cli::run(args, out, err) != 0) {
      files["<error>"] = err.str();
      return files;
    }
  }
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) files[fs::relative(entry.path(), dir).string()] = slurp(entry.path());
  return files;
}

void determinism() {
  Line line;
  const fs::path dir = fs::temp_directory_path() / "fdcnet_acceptance_determinism";
  const auto first = pipeline_outputs(dir);
  const auto second = pipeline_outputs(dir);
  fs::remove_all(dir);
  line.require(!first.count("<error>"), "pipeline ran");
  line.require(first.size() >= 12, "all outputs present");
  line.require(first == second, "byte-identical reruns");
  line.detail << "synth, train, eval, denoise and report rerun: " << first.size()
              << " output files compared byte for byte";
  if (first != second) {
    for (const auto& [name, bytes] : first) {
      auto it = second.find(name);
      if (it == second.end() || it->second != bytes) line.detail << "differs: " << name << ' ';
    }
  }
  emit("determinism", line);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  documented_limits();
  gradient_suite();
  dct_suite();
  noise_injection();
  const Dataset data = desk_dataset();
  residual_identity(data);
  ranges_and_simplex();
  ablation_equivalence();
  std::vector<EpochLog> log;
  desk_end_to_end(data, log);
  curriculum(log);
  determinism();
  std::printf("%d of 10 criteria failed; total %.1f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
