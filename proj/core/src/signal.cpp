#include "fdcnet/signal.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fdcnet/rng.hpp"

namespace fdcnet::signal {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Adds amp * sin(2 pi f t / fs + phase) to out, using a rotation recurrence.
void add_sinusoid(std::span<double> out, double freq_hz, double fs, double amp, double phase) {
  const double w = kTwoPi * freq_hz / fs;
  const double cw = std::cos(w), sw = std::sin(w);
  double s = std::sin(phase), c = std::cos(phase);
  for (auto& v : out) {
    v += amp * s;
    const double s_next = s * cw + c * sw;
    c = c * cw - s * sw;
    s = s_next;
  }
}

// Sum of n random-phase sinusoids in [lo, hi) Hz with total mean power `power`.
void add_band(std::span<double> out, double lo, double hi, double power, double fs, std::size_t n, Rng& rng) {
  if (power <= 0.0) return;
  std::vector<double> weight(n);
  double total = 0.0;
  for (auto& wgt : weight) total += (wgt = rng.uniform(0.5, 1.5));
  for (std::size_t i = 0; i < n; ++i) {
    const double f = rng.uniform(lo, hi);
    const double phase = rng.uniform(0.0, kTwoPi);
    // A unit sinusoid carries power 1/2.
    add_sinusoid(out, f, fs, std::sqrt(2.0 * power * weight[i] / total), phase);
  }
}

// 1/f noise by spectral synthesis on the frequency grid of the record.
void add_pink(std::span<double> out, double power, double fs, Rng& rng) {
  if (power <= 0.0) return;
  const double duration = static_cast<double>(out.size()) / fs;
  const double df = 1.0 / duration;
  std::vector<double> freqs;
  for (double f = df; f <= 45.0; f += df)
    if (f >= 1.0) freqs.push_back(f);
  if (freqs.empty()) freqs.push_back(std::min(45.0, fs / 4.0));
  double total = 0.0;
  for (double f : freqs) total += 1.0 / f;
  for (double f : freqs) add_sinusoid(out, f, fs, std::sqrt(2.0 * power * (1.0 / f) / total), rng.uniform(0.0, kTwoPi));
}

double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

void normalize_rms(std::vector<double>& x) {
  const double r = rms(x);
  if (r == 0.0) {
    std::fill(x.begin(), x.end(), 1.0);
    return;
  }
  for (auto& v : x) v /= r;
}

std::size_t event_count(double duration_s, double rate_hz, Rng& rng) {
  return static_cast<std::size_t>(std::floor(duration_s * rate_hz + rng.uniform()));
}

std::vector<double> emg_surrogate(std::size_t n, double fs, Rng& rng) {
  std::vector<double> carrier(n, 0.0);
  add_band(carrier, 20.0, 45.0, 1.0, fs, 32, rng);

  const double duration = static_cast<double>(n) / fs;
  std::vector<double> envelope(n, 0.3);
  const auto bursts = std::max<std::size_t>(1, event_count(duration, 1.5, rng));
  for (std::size_t b = 0; b < bursts; ++b) {
    const double center = rng.uniform(-0.25, duration + 0.25);
    const double width = rng.uniform(0.1, 0.3);
    const double amp = rng.uniform(0.7, 1.5);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs - center;
      envelope[i] += amp * std::exp(-0.5 * t * t / (width * width));
    }
  }
  for (std::size_t i = 0; i < n; ++i) carrier[i] *= envelope[i];
  return carrier;
}

std::vector<double> eog_surrogate(std::size_t n, double fs, Rng& rng) {
  std::vector<double> x(n, 0.0);
  const double duration = static_cast<double>(n) / fs;
  // slow drift
  for (int i = 0; i < 3; ++i)
    add_sinusoid(x, rng.uniform(0.05, 0.8), fs, rng.uniform(0.5, 1.0), rng.uniform(0.0, kTwoPi));
  // smoothed random steps
  const auto steps = event_count(duration, 0.2, rng);
  for (std::size_t s = 0; s < steps; ++s) {
    const double center = rng.uniform(0.0, duration);
    const double amp = rng.normal();
    const double sigma = 0.25;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs - center;
      x[i] += amp * 0.5 * (1.0 + std::erf(t / (std::numbers::sqrt2 * sigma)));
    }
  }
  // blinks
  const auto blinks = event_count(duration, 0.4, rng);
  for (std::size_t b = 0; b < blinks; ++b) {
    const double center = rng.uniform(0.0, duration);
    const double width = rng.uniform(0.08, 0.15);
    const double amp = rng.uniform(1.5, 3.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs - center;
      x[i] += amp * std::exp(-0.5 * t * t / (width * width));
    }
  }
  return x;
}

}  // namespace

std::size_t SynthSpec::trial_samples() const {
  return static_cast<std::size_t>(std::llround(sample_rate_hz * trial_length_s));
}

std::vector<Trial> synth_clean_eeg(const SynthSpec& spec) {
  const auto& p = spec.powers;
  for (double v : {p.delta, p.theta, p.alpha, p.beta, p.gamma, spec.pink_power})
    if (v < 0.0) throw ConfigError("band powers must be >= 0");
  if (spec.label_effect < 0.0 || spec.label_effect >= 1.0) throw ConfigError("label_effect must lie in [0, 1)");
  if (spec.channels == 0 || spec.sample_rate_hz <= 0.0) throw ConfigError("channels and sample rate must be positive");
  const auto T = spec.trial_samples();
  if (T == 0) throw ConfigError("trial length is shorter than one sample");
  const double fs = spec.sample_rate_hz;

  std::vector<Trial> trials;
  trials.reserve(spec.n_subjects * spec.trials_per_subject);
  for (std::size_t s = 0; s < spec.n_subjects; ++s) {
    Rng subject_rng(derive_seed(spec.seed, 0x5B1, s));
    double band_factor[5];
    for (auto& f : band_factor) f = subject_rng.uniform(0.8, 1.2);

    for (std::size_t k = 0; k < spec.trials_per_subject; ++k) {
      Rng rng(derive_seed(spec.seed, s, k + 1));
      Trial trial;
      trial.subject_id = static_cast<std::uint32_t>(s);
      trial.valence = static_cast<std::uint8_t>(rng.index(2));
      trial.arousal = static_cast<std::uint8_t>(rng.index(2));
      const double e = spec.label_effect;
      const double alpha_gain = trial.valence ? 1.0 + e : 1.0 - e;
      const double beta_gain = trial.arousal ? 1.0 + e : 1.0 - e;

      std::vector<double> data(spec.channels * T, 0.0);
      for (std::size_t c = 0; c < spec.channels; ++c) {
        std::span<double> ch(data.data() + c * T, T);
        const double gain = rng.uniform(0.8, 1.2);
        add_band(ch, 1.0, 4.0, gain * band_factor[0] * p.delta, fs, 6, rng);
        add_band(ch, 4.0, 8.0, gain * band_factor[1] * p.theta, fs, 6, rng);
        add_band(ch, 8.0, 13.0, gain * band_factor[2] * p.alpha * alpha_gain, fs, 6, rng);
        add_band(ch, 13.0, 30.0, gain * band_factor[3] * p.beta * beta_gain, fs, 6, rng);
        add_band(ch, 30.0, 45.0, gain * band_factor[4] * p.gamma, fs, 6, rng);
        add_pink(ch, gain * spec.pink_power, fs, rng);
      }
      trial.signal = Tensor({spec.channels, T}, std::move(data));
      trials.push_back(std::move(trial));
    }
  }
  return trials;
}

ArtifactKind parse_artifact_kind(std::string_view name) {
  if (name == "emg") return ArtifactKind::emg;
  if (name == "eog") return ArtifactKind::eog;
  throw ConfigError("unknown artifact kind '" + std::string(name) + "'");
}

std::vector<double> synth_artifact(ArtifactKind kind, std::size_t length, std::uint64_t seed, double sample_rate_hz) {
  if (length == 0) throw ShapeError("artifact length must be >= 1");
  Rng rng(seed);
  auto x = kind == ArtifactKind::emg ? emg_surrogate(length, sample_rate_hz, rng)
                                     : eog_surrogate(length, sample_rate_hz, rng);
  normalize_rms(x);
  return x;
}

Injection inject_noise(const Tensor& clean, const NoiseSpec& spec) {
  if (clean.ndim() != 2) throw ShapeError("inject_noise expects [C x T], got " + shape_str(clean.shape()));
  if (spec.gaussian_sigma < 0.0) throw ConfigError("gaussian_sigma must be >= 0");
  if (spec.emg_eog_ratio <= 0.0) throw ConfigError("emg_eog_ratio must be > 0");
  const auto C = clean.dim(0), T = clean.dim(1);
  auto cs = clean.data();
  if (rms(cs) == 0.0) throw DegenerateError("inject_noise: clean signal has zero RMS");

  const double snr_gain = std::pow(10.0, spec.target_snr_db / 20.0);
  std::vector<double> artifact(C * T), noisy(C * T);
  for (std::size_t c = 0; c < C; ++c) {
    auto emg = synth_artifact(ArtifactKind::emg, T, derive_seed(spec.seed, 2 * c), spec.sample_rate_hz);
    auto eog = synth_artifact(ArtifactKind::eog, T, derive_seed(spec.seed, 2 * c + 1), spec.sample_rate_hz);
    std::vector<double> mixed(T);
    for (std::size_t t = 0; t < T; ++t) mixed[t] = (emg[t] + spec.emg_eog_ratio * eog[t]) / (1.0 + spec.emg_eog_ratio);
    const double clean_rms = rms(cs.subspan(c * T, T));
    const double noise_rms = rms(mixed);
    const double lambda = noise_rms > 0.0 ? clean_rms / (noise_rms * snr_gain) : 0.0;
    for (std::size_t t = 0; t < T; ++t) artifact[c * T + t] = lambda * mixed[t];
  }

  Rng gauss(derive_seed(spec.seed, 0xA11CE));
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < C * T; ++i) {
    ps += cs[i] * cs[i];
    pn += artifact[i] * artifact[i];
    noisy[i] = cs[i] + artifact[i] + (spec.gaussian_sigma > 0.0 ? spec.gaussian_sigma * gauss.normal() : 0.0);
  }
  Injection out;
  out.achieved_snr_db = 10.0 * std::log10(ps / pn);
  out.noisy = Tensor(clean.shape(), std::move(noisy));
  out.artifact = Tensor(clean.shape(), std::move(artifact));
  return out;
}

std::size_t window_count(std::size_t trial_samples, std::size_t window, double overlap) {
  if (window == 0) throw ConfigError("window must be >= 1");
  if (overlap < 0.0 || overlap >= 1.0) throw ConfigError("overlap must lie in [0, 1)");
  if (trial_samples < window)
    throw ShapeError("trial of " + std::to_string(trial_samples) + " samples is shorter than the " +
                     std::to_string(window) + "-sample window");
  const auto stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(window) * (1.0 - overlap))));
  return (trial_samples - window) / stride + 1;
}

std::vector<Tensor> segment_windows(const Tensor& trial, std::size_t window, double overlap) {
  if (trial.ndim() != 2) throw ShapeError("segment_windows expects [C x T], got " + shape_str(trial.shape()));
  const auto C = trial.dim(0), T = trial.dim(1);
  const auto count = window_count(T, window, overlap);
  const auto stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(window) * (1.0 - overlap))));
  auto xs = trial.data();
  std::vector<Tensor> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    std::vector<double> seg(C * window);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < window; ++t) seg[c * window + t] = xs[c * T + w * stride + t];
    out.emplace_back(Shape{C, window}, std::move(seg));
  }
  return out;
}

namespace {

void require_same_length(const char* what, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError(std::string(what) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  if (a.empty()) throw ShapeError(std::string(what) + ": empty input");
}

}  // namespace

double metric_snr(std::span<const double> clean, std::span<const double> denoised) {
  require_same_length("metric_snr", clean, denoised);
  double ps = 0.0, pr = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    ps += clean[i] * clean[i];
    const double r = clean[i] - denoised[i];
    pr += r * r;
  }
  if (ps == 0.0) throw DegenerateError("metric_snr: clean signal is all zeros");
  if (pr == 0.0) return kSnrCeilingDb;
  return std::min(kSnrCeilingDb, 10.0 * std::log10(ps / pr));
}

double metric_cc(std::span<const double> clean, std::span<const double> denoised) {
  require_same_length("metric_cc", clean, denoised);
  const double n = static_cast<double>(clean.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    ma += clean[i];
    mb += denoised[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double da = clean[i] - ma, db = denoised[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateError("metric_cc: zero-variance input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double metric_mse(std::span<const double> clean, std::span<const double> denoised) {
  require_same_length("metric_mse", clean, denoised);
  double s = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) s += (clean[i] - denoised[i]) * (clean[i] - denoised[i]);
  return s / static_cast<double>(clean.size());
}

}  // namespace fdcnet::signal
