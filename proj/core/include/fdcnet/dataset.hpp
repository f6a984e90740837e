#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fdcnet/signal.hpp"
#include "fdcnet/tensor.hpp"

namespace fdcnet {

struct EegSegment {
  Tensor clean;  // [C x T]
  Tensor noisy;  // [C x T]
  std::uint8_t valence = 0;
  std::uint8_t arousal = 0;
  std::uint32_t subject_id = 0;
  double achieved_snr_db = 0.0;
};

struct Dataset {
  std::size_t channels = 0;
  std::size_t samples = 0;
  std::vector<EegSegment> segments;

  std::size_t size() const { return segments.size(); }
};

inline constexpr std::uint32_t kDatasetVersion = 1;

// Noise goes in per trial, then trials are cut into windows.
Dataset build_dataset(const std::vector<signal::Trial>& trials, const signal::NoiseSpec& noise,
                      std::size_t window = 128, double overlap = 0.5);

// "FDCD" | u32 version | u32 C | u32 T | u64 count | segments...
void write_dataset(const std::filesystem::path& file, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& file);

}  // namespace fdcnet
