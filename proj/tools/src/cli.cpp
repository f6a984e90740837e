#include "fdcnet_cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "fdcnet/dataset.hpp"
#include "fdcnet/errors.hpp"
#include "fdcnet/trainer.hpp"
#include "fdcnet_cli/report.hpp"

namespace fdcnet::cli {
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kCleanStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kEvalStream = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SynthArgs {
  std::size_t subjects = 4;
  std::size_t trials = 10;
  std::size_t channels = 32;
  double label_effect = 0.5;
  double snr = 0.0;
  double ratio = 1.0;
  double sigma = 0.01;
  double trial_length = 5.5;
  std::size_t window = 128;
  double overlap = 0.5;
  std::uint64_t seed = 0;
  std::string out;
};

struct ModelArgs {
  std::string preset = "desk";
  std::optional<std::size_t> d_model, layers, heads, freq_heads, ff_dim, t_fb, cls_hidden, gate_reduction;
  std::optional<double> dropout;
  bool no_feedback = false, no_cross = false, no_eegsp = false;
};

struct TrainArgs {
  std::string data, out, log;
  ModelArgs model;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lr = 1e-3, weight_decay = 0.01, alpha = 0.6;
  double snr_start = 3.0, snr_end = -3.0;
  double split = 0.8;
  bool split_by_subject = false;
  double ratio = 1.0, sigma = 0.01;
  std::uint64_t seed = 0;
};

struct EvalArgs {
  std::string model, data, out;
  std::string grid = "-3:3:1";
  std::string subset = "test";
  double split = 0.8;
  bool split_by_subject = false;
  double ratio = 1.0, sigma = 0.01;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
};

struct DenoiseArgs {
  std::string model, data, out;
  std::size_t batch_size = 64;
};

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out_dir;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

fs::path sibling(const std::string& file, const char* name) {
  const fs::path parent = fs::path(file).parent_path();
  return parent.empty() ? fs::path(name) : parent / name;
}

void ensure_parent(const fs::path& file) {
  const auto parent = file.parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_text(const fs::path& file, const std::string& text) {
  ensure_parent(file);
  std::ofstream os(file, std::ios::binary);
  if (!os) throw FormatError("cannot open " + file.string() + " for writing");
  os << text;
}

ModelConfig build_model(const ModelArgs& a, std::size_t channels) {
  ModelConfig c;
  if (a.preset == "desk") {
    c = ModelConfig::desk();
  } else if (a.preset == "full") {
    c = ModelConfig::full();
  } else {
    throw ConfigError("unknown preset '" + a.preset + "' (expected desk or full)");
  }
  c.channels = channels;
  if (a.d_model) c.d_model = *a.d_model;
  if (a.layers) c.n_layers = *a.layers;
  if (a.heads) c.n_heads = *a.heads;
  if (a.freq_heads) c.freq_heads = *a.freq_heads;
  if (a.ff_dim) c.ff_dim = *a.ff_dim;
  if (a.t_fb) c.t_fb = *a.t_fb;
  if (a.cls_hidden) c.cls_hidden = *a.cls_hidden;
  if (a.gate_reduction) c.gate_reduction = *a.gate_reduction;
  if (a.dropout) c.dropout = *a.dropout;
  c.no_feedback = a.no_feedback;
  c.no_cross = a.no_cross;
  c.no_eegsp = a.no_eegsp;
  return c;
}

std::vector<std::size_t> all_indices(const Dataset& d) {
  std::vector<std::size_t> idx(d.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

void do_synth(const SynthArgs& a, std::ostream& out) {
  signal::SynthSpec s;
  s.n_subjects = a.subjects;
  s.trials_per_subject = a.trials;
  s.channels = a.channels;
  s.label_effect = a.label_effect;
  s.trial_length_s = a.trial_length;
  s.seed = derive_seed(a.seed, kCleanStream);
  signal::NoiseSpec n;
  n.target_snr_db = a.snr;
  n.emg_eog_ratio = a.ratio;
  n.gaussian_sigma = a.sigma;
  n.seed = derive_seed(a.seed, kNoiseStream);
  const auto data = build_dataset(signal::synth_clean_eeg(s), n, a.window, a.overlap);
  ensure_parent(a.out);
  write_dataset(a.out, data);
  out << "wrote " << data.size() << " segments (" << data.channels << " x " << data.samples << ") to " << a.out
      << '\n';
}

void do_train(TrainArgs a, std::ostream& out) {
  const Dataset data = read_dataset(a.data);
  TrainConfig c;
  c.model = build_model(a.model, data.channels);
  c.epochs = a.epochs;
  c.batch_size = a.batch_size;
  c.lr = a.lr;
  c.weight_decay = a.weight_decay;
  c.alpha = a.alpha;
  c.snr_start = a.snr_start;
  c.snr_end = a.snr_end;
  c.split = a.split;
  c.split_by_subject = a.split_by_subject;
  c.emg_eog_ratio = a.ratio;
  c.gaussian_sigma = a.sigma;
  c.seed = a.seed;
  c.validate();
  if (a.log.empty()) a.log = fs::path(a.out).replace_extension(".train.csv").string();

  auto result = train(data, c, [&](const EpochLog& e) {
    out << "epoch " << e.epoch + 1 << '/' << c.epochs << "  snr " << fmt("%+.2f", e.snr_db) << " dB  loss "
        << fmt("%.4f", e.loss_total) << " (mse " << fmt("%.4f", e.loss_mse) << ", cls " << fmt("%.4f", e.loss_cls)
        << ")  val_acc " << fmt("%.3f", e.val_acc) << "  val_cc " << fmt("%.2f", e.val_cc) << '\n';
  });
  ensure_parent(a.out);
  result.model.save(a.out);
  ensure_parent(a.log);
  write_train_log(fs::path(a.log), result.log);
  out << "train/test segments: " << result.split.train.size() << '/' << result.split.test.size() << '\n'
      << "model: " << a.out << "\nlog: " << a.log << '\n';
}

void do_eval(const EvalArgs& a, std::ostream& out) {
  const auto grid = parse_snr_grid(a.grid);
  FdcNet model = FdcNet::load(a.model);
  const Dataset data = read_dataset(a.data);
  std::vector<std::size_t> idx;
  if (a.subset == "test") {
    idx = split_dataset(data, a.split, a.seed, a.split_by_subject).test;
  } else if (a.subset == "all") {
    idx = all_indices(data);
  } else {
    throw ConfigError("unknown subset '" + a.subset + "' (expected test or all)");
  }
  EvalOptions opt;
  opt.emg_eog_ratio = a.ratio;
  opt.gaussian_sigma = a.sigma;
  opt.batch_size = a.batch_size;
  const auto report = evaluate(model, data, idx, grid, derive_seed(a.seed, kEvalStream), opt);
  ensure_parent(a.out);
  write_eval_csv(fs::path(a.out), report);
  out << "evaluated " << idx.size() << " segments at " << grid.size() << " SNR levels\n";
  out << summary_table({{fs::path(a.model).stem().string(), report}});
}

void do_denoise(const DenoiseArgs& a, std::ostream& out) {
  if (a.batch_size == 0) throw ConfigError("batch-size must be positive");
  FdcNet model = FdcNet::load(a.model);
  Dataset data = read_dataset(a.data);
  if (data.channels != model.config().channels) throw ConfigError("dataset channel count does not match the model");
  NoGradGuard guard;
  const std::size_t n = data.channels * data.samples;
  double in_snr = 0.0, out_snr = 0.0;
  for (std::size_t start = 0; start < data.size(); start += a.batch_size) {
    const std::size_t len = std::min(a.batch_size, data.size() - start);
    std::vector<double> x(len * n);
    for (std::size_t k = 0; k < len; ++k) {
      const auto src = data.segments[start + k].noisy.data();
      std::copy(src.begin(), src.end(), x.begin() + k * n);
    }
    const Tensor x_hat = model.forward(Tensor({len, data.channels, data.samples}, std::move(x)), {}).x_hat;
    const auto y = x_hat.data();
    for (std::size_t k = 0; k < len; ++k) {
      auto& seg = data.segments[start + k];
      std::vector<double> den(y.begin() + k * n, y.begin() + (k + 1) * n);
      in_snr += signal::metric_snr(seg.clean, seg.noisy);
      seg.noisy = Tensor({data.channels, data.samples}, std::move(den));
      seg.achieved_snr_db = signal::metric_snr(seg.clean, seg.noisy);
      out_snr += seg.achieved_snr_db;
    }
  }
  ensure_parent(a.out);
  write_dataset(a.out, data);
  const double count = static_cast<double>(std::max<std::size_t>(data.size(), 1));
  out << "denoised " << data.size() << " segments to " << a.out << "\nmean SNR " << fmt("%.2f", in_snr / count)
      << " dB -> " << fmt("%.2f", out_snr / count) << " dB\n";
}

void do_report(const ReportArgs& a, std::ostream& out) {
  std::vector<Series> series;
  for (const auto& file : a.inputs) {
    try {
      series.push_back({fs::path(file).stem().string(), read_eval_csv(fs::path(file))});
    } catch (const FormatError& e) {
      throw FormatError(file + ": " + e.what());
    }
  }
  fs::create_directories(a.out_dir);
  for (Metric m : {Metric::output_snr, Metric::cc, Metric::mse, Metric::acc4})
    write_text(fs::path(a.out_dir) / (std::string(metric_file_stem(m)) + ".svg"), metric_chart_svg(m, series));
  const std::string table = summary_table(series);
  write_text(fs::path(a.out_dir) / "summary.txt", table);
  out << table;
}

std::vector<std::string> option_names(const CLI::App* app) {
  std::vector<std::string> names;
  for (const auto* opt : app->get_options()) {
    for (const auto& l : opt->get_lnames()) names.push_back("--" + l);
  }
  return names;
}

void check_extras(const CLI::App* app, const CLI::App* sub) {
  for (const auto& extra : app->remaining(true)) {
    if (extra.rfind("-", 0) != 0) throw UsageError("unexpected argument '" + extra + "'");
    const std::string flag = extra.substr(0, extra.find('='));
    std::string msg = "unknown option '" + flag + "' for '" + sub->get_name() + "'";
    auto names = option_names(sub);
    for (auto& n : option_names(app)) names.push_back(n);
    const auto hint = closest_match(flag, names);
    if (!hint.empty()) msg += "; did you mean '" + hint + "'?";
    throw UsageError(msg);
  }
}

// The active subcommand's options as a "[name]" section; unset optional
// values are left out so that re-reading the file leaves them unset.
std::string effective_config(const CLI::App* sub) {
  std::istringstream body(sub->config_to_str(true, false));
  std::string text = "[" + sub->get_name() + "]\n";
  for (std::string line; std::getline(body, line);) {
    if (line.size() >= 3 && line.compare(line.size() - 3, 3, "=\"\"") == 0) continue;
    text += line + '\n';
  }
  return text;
}

void check_subcommand(const CLI::App& app, const std::vector<std::string>& args) {
  if (args.empty() || args.front().rfind("-", 0) == 0) return;
  std::vector<std::string> names;
  for (const auto* sub : app.get_subcommands({})) names.push_back(sub->get_name());
  if (std::find(names.begin(), names.end(), args.front()) != names.end()) return;
  std::string msg = "unknown subcommand '" + args.front() + "'";
  const auto hint = closest_match(args.front(), names);
  if (!hint.empty()) msg += "; did you mean '" + hint + "'?";
  throw UsageError(msg);
}

CLI::App* add_sub(CLI::App& app, const char* name, const char* help) {
  auto* sub = app.add_subcommand(name, help);
  sub->allow_extras();
  sub->configurable();
  sub->option_defaults()->always_capture_default();
  return sub;
}

void add_model_options(CLI::App* sub, ModelArgs& m) {
  sub->add_option("--preset", m.preset, "Model size preset")->check(CLI::IsMember({"desk", "full"}));
  sub->add_option("--d-model", m.d_model, "Latent width");
  sub->add_option("--layers", m.layers, "Encoder layers");
  sub->add_option("--heads", m.heads, "Attention heads per layer");
  sub->add_option("--freq-heads", m.freq_heads, "Heads attending over DCT coefficients");
  sub->add_option("--ff-dim", m.ff_dim, "Feed-forward width");
  sub->add_option("--t-fb", m.t_fb, "Dual-path iterations");
  sub->add_option("--cls-hidden", m.cls_hidden, "Classifier hidden width");
  sub->add_option("--gate-reduction", m.gate_reduction, "Channel gate reduction ratio");
  sub->add_option("--dropout", m.dropout, "Dropout rate");
  sub->add_flag("--no-feedback", m.no_feedback, "Disable the classification -> denoising gate");
  sub->add_flag("--no-cross", m.no_cross, "Disable the denoising -> classification message");
  sub->add_flag("--no-eegsp", m.no_eegsp, "Plain transformer: no channel gate, fixed PE, time heads only");
}

}  // namespace

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::string closest_match(std::string_view word, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t best_d = 4;
  for (const auto& c : candidates) {
    const std::size_t d = edit_distance(word, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::vector<double> parse_snr_grid(std::string_view text) {
  auto number = [&](std::string_view s) {
    const std::string str(s);
    char* end = nullptr;
    const double v = std::strtod(str.c_str(), &end);
    if (str.empty() || *end != '\0' || !std::isfinite(v))
      throw ConfigError("bad SNR value '" + str + "' in grid '" + std::string(text) + "'");
    return v;
  };
  std::vector<double> grid;
  if (text.find(':') != std::string_view::npos) {
    const auto p1 = text.find(':');
    const auto p2 = text.find(':', p1 + 1);
    if (p2 == std::string_view::npos || text.find(':', p2 + 1) != std::string_view::npos)
      throw ConfigError("SNR grid '" + std::string(text) + "' must be start:end:step");
    const double start = number(text.substr(0, p1));
    const double end = number(text.substr(p1 + 1, p2 - p1 - 1));
    const double step = number(text.substr(p2 + 1));
    if (step == 0.0 || (end - start) * step < 0.0)
      throw ConfigError("SNR grid step " + std::string(text.substr(p2 + 1)) + " does not move from start to end");
    const double span = (end - start) / step;
    if (span > 10000.0) throw ConfigError("SNR grid '" + std::string(text) + "' has too many points");
    const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
    for (std::size_t k = 0; k < count; ++k) grid.push_back(start + static_cast<double>(k) * step + 0.0);
  } else {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto comma = std::min(text.find(',', pos), text.size());
      grid.push_back(number(text.substr(pos, comma - pos)) + 0.0);
      pos = comma + 1;
    }
  }
  return grid;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint EEG denoising and emotion classification", "fdcnet"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_extras();
  app.set_config("--config", "", "Read options from a key = value file with [subcommand] sections");
  app.set_version_flag("--version", "fdcnet 0.1.0");

  SynthArgs sa;
  auto* synth = add_sub(app, "synth", "Generate a synthetic noisy EEG dataset");
  synth->add_option("--subjects", sa.subjects, "Number of subjects")->check(CLI::PositiveNumber);
  synth->add_option("--trials", sa.trials, "Trials per subject")->check(CLI::PositiveNumber);
  synth->add_option("--channels", sa.channels, "EEG channels")->check(CLI::PositiveNumber);
  synth->add_option("--label-effect", sa.label_effect, "Band-power modulation by label")->check(CLI::Range(0.0, 0.999));
  synth->add_option("--snr", sa.snr, "Injected SNR in dB");
  synth->add_option("--ratio", sa.ratio, "EOG weight relative to EMG")->check(CLI::NonNegativeNumber);
  synth->add_option("--sigma", sa.sigma, "Gaussian noise floor")->check(CLI::NonNegativeNumber);
  synth->add_option("--trial-length", sa.trial_length, "Trial length in seconds")->check(CLI::PositiveNumber);
  synth->add_option("--window", sa.window, "Window length in samples")->check(CLI::PositiveNumber);
  synth->add_option("--overlap", sa.overlap, "Window overlap fraction")->check(CLI::Range(0.0, 0.99));
  synth->add_option("--seed", sa.seed, "Random seed");
  synth->add_option("--out", sa.out, "Output dataset file")->required();

  TrainArgs ta;
  auto* trn = add_sub(app, "train", "Train a model on a dataset file");
  trn->add_option("--data", ta.data, "Dataset file")->required();
  trn->add_option("--out", ta.out, "Output checkpoint")->required();
  trn->add_option("--log", ta.log, "Training log CSV (default: <out>.train.csv)");
  add_model_options(trn, ta.model);
  trn->add_option("--epochs", ta.epochs, "Epochs")->check(CLI::PositiveNumber);
  trn->add_option("--batch-size", ta.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  trn->add_option("--lr", ta.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  trn->add_option("--weight-decay", ta.weight_decay, "AdamW weight decay")->check(CLI::NonNegativeNumber);
  trn->add_option("--alpha", ta.alpha, "Reconstruction weight in the joint loss")->check(CLI::Range(0.0, 1.0));
  trn->add_option("--snr-start", ta.snr_start, "Curriculum SNR at the first epoch");
  trn->add_option("--snr-end", ta.snr_end, "Curriculum SNR at the last epoch");
  trn->add_option("--split", ta.split, "Train fraction");
  trn->add_flag("--split-by-subject", ta.split_by_subject, "Keep each subject on one side of the split");
  trn->add_option("--ratio", ta.ratio, "EOG weight relative to EMG")->check(CLI::NonNegativeNumber);
  trn->add_option("--sigma", ta.sigma, "Gaussian noise floor")->check(CLI::NonNegativeNumber);
  trn->add_option("--seed", ta.seed, "Random seed");

  EvalArgs ea;
  auto* evl = add_sub(app, "eval", "Evaluate a checkpoint across an SNR grid");
  evl->add_option("--model", ea.model, "Checkpoint")->required();
  evl->add_option("--data", ea.data, "Dataset file")->required();
  evl->add_option("--out", ea.out, "Output report CSV")->required();
  evl->add_option("--snr-grid", ea.grid, "start:end:step or comma list, dB");
  evl->add_option("--subset", ea.subset, "Segments to score")->check(CLI::IsMember({"test", "all"}));
  evl->add_option("--split", ea.split, "Train fraction used in training");
  evl->add_flag("--split-by-subject", ea.split_by_subject, "Split was by subject");
  evl->add_option("--ratio", ea.ratio, "EOG weight relative to EMG")->check(CLI::NonNegativeNumber);
  evl->add_option("--sigma", ea.sigma, "Gaussian noise floor")->check(CLI::NonNegativeNumber);
  evl->add_option("--batch-size", ea.batch_size, "Evaluation batch size")->check(CLI::PositiveNumber);
  evl->add_option("--seed", ea.seed, "Training seed (selects the split and evaluation noise)");

  DenoiseArgs da;
  auto* den = add_sub(app, "denoise", "Denoise the noisy signals of a dataset file");
  den->add_option("--model", da.model, "Checkpoint")->required();
  den->add_option("--data", da.data, "Dataset file")->required();
  den->add_option("--out", da.out, "Output dataset; denoised signals replace the noisy field")->required();
  den->add_option("--batch-size", da.batch_size, "Batch size")->check(CLI::PositiveNumber);

  ReportArgs ra;
  auto* rep = add_sub(app, "report", "Plot evaluation CSVs as SVG charts with a summary table");
  rep->add_option("inputs", ra.inputs, "Evaluation CSV files")->required();
  rep->add_option("--out-dir", ra.out_dir, "Output directory")->required();

  try {
    check_subcommand(app, args);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    CLI::App* sub = app.get_subcommands().front();
    check_extras(&app, sub);

    fs::path run_config;
    if (sub == synth) {
      do_synth(sa, out);
      run_config = sibling(sa.out, "run_config.txt");
    } else if (sub == trn) {
      do_train(ta, out);
      run_config = sibling(ta.out, "run_config.txt");
    } else if (sub == evl) {
      do_eval(ea, out);
      run_config = sibling(ea.out, "run_config.txt");
    } else if (sub == den) {
      do_denoise(da, out);
      run_config = sibling(da.out, "run_config.txt");
    } else {
      do_report(ra, out);
      run_config = fs::path(ra.out_dir) / "run_config.txt";
    }
    write_text(run_config, effective_config(sub));
    return kExitOk;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const fdcnet::ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace fdcnet::cli
