#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fdcnet/tensor.hpp"

namespace fdcnet::signal {

// Mean power (uV^2) per canonical EEG band before subject, channel and label
// modulation.
struct BandPowers {
  double delta = 0.05;  // 1-4 Hz
  double theta = 0.20;  // 4-8 Hz
  double alpha = 0.25;  // 8-13 Hz
  double beta = 0.15;   // 13-30 Hz
  double gamma = 0.05;  // 30-45 Hz
};

struct SynthSpec {
  std::size_t n_subjects = 4;
  std::size_t trials_per_subject = 10;
  std::size_t channels = 32;
  double sample_rate_hz = 128.0;
  double trial_length_s = 5.5;
  BandPowers powers;
  double pink_power = 0.05;
  // Alpha power is scaled by (1 +/- label_effect) with valence, beta power
  // with arousal. Must lie in [0, 1).
  double label_effect = 0.5;
  std::uint64_t seed = 0;

  std::size_t trial_samples() const;
};

struct Trial {
  Tensor signal;  // [C x T_trial]
  std::uint8_t valence = 0;
  std::uint8_t arousal = 0;
  std::uint32_t subject_id = 0;
};

// Each channel is a sum of random-phase sinusoid mixtures per band plus 1/f
// noise. Deterministic per seed.
std::vector<Trial> synth_clean_eeg(const SynthSpec& spec);

enum class ArtifactKind { emg, eog };
ArtifactKind parse_artifact_kind(std::string_view name);

// Unit-RMS artifact surrogate.
//   emg: 20-45 Hz random-phase mixture under smooth burst envelopes
//   eog: sub-4 Hz drift, smoothed steps and blink bumps
std::vector<double> synth_artifact(ArtifactKind kind, std::size_t length, std::uint64_t seed,
                                   double sample_rate_hz = 128.0);

struct NoiseSpec {
  double target_snr_db = 0.0;
  double emg_eog_ratio = 1.0;
  double gaussian_sigma = 0.01;
  std::uint64_t seed = 0;
  double sample_rate_hz = 128.0;
};

struct Injection {
  Tensor noisy;     // clean + artifact + gaussian
  Tensor artifact;  // lambda * mixed artifact, per channel
  double achieved_snr_db = 0.0;  // measured against `artifact` only
};

// Per channel: n = (emg + ratio * eog) / (1 + ratio), scaled by
// lambda = RMS(clean) / (RMS(n) 10^(snr/20)), then N(0, sigma) is added.
Injection inject_noise(const Tensor& clean, const NoiseSpec& spec);

std::size_t window_count(std::size_t trial_samples, std::size_t window = 128, double overlap = 0.5);

// Sliding windows along the last axis of a [C x T_trial] trial; the trailing
// remainder is dropped.
std::vector<Tensor> segment_windows(const Tensor& trial, std::size_t window = 128, double overlap = 0.5);

inline constexpr double kSnrCeilingDb = 100.0;

// 10 log10(sum clean^2 / sum (clean - denoised)^2), capped at +100 dB.
double metric_snr(std::span<const double> clean, std::span<const double> denoised);
// Pearson correlation of the flattened signals.
double metric_cc(std::span<const double> clean, std::span<const double> denoised);
double metric_mse(std::span<const double> clean, std::span<const double> denoised);

inline double metric_snr(const Tensor& c, const Tensor& d) { return metric_snr(c.data(), d.data()); }
inline double metric_cc(const Tensor& c, const Tensor& d) { return metric_cc(c.data(), d.data()); }
inline double metric_mse(const Tensor& c, const Tensor& d) { return metric_mse(c.data(), d.data()); }

}  // namespace fdcnet::signal
