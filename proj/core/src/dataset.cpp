#include "fdcnet/dataset.hpp"

#include <fstream>

#include "fdcnet/binio.hpp"
#include "fdcnet/rng.hpp"

namespace fdcnet {

Dataset build_dataset(const std::vector<signal::Trial>& trials, const signal::NoiseSpec& noise,
                      std::size_t window, double overlap) {
  Dataset out;
  if (trials.empty()) return out;
  out.channels = trials.front().signal.dim(0);
  out.samples = window;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& trial = trials[i];
    if (trial.signal.ndim() != 2 || trial.signal.dim(0) != out.channels)
      throw ShapeError("trial " + std::to_string(i) + " has shape " + shape_str(trial.signal.shape()) +
                       ", expected " + std::to_string(out.channels) + " channels");
    auto spec = noise;
    spec.seed = derive_seed(noise.seed, i);
    auto inj = signal::inject_noise(trial.signal, spec);
    auto clean = signal::segment_windows(trial.signal, window, overlap);
    auto noisy = signal::segment_windows(inj.noisy, window, overlap);
    for (std::size_t w = 0; w < clean.size(); ++w) {
      EegSegment seg;
      seg.clean = clean[w];
      seg.noisy = noisy[w];
      seg.valence = trial.valence;
      seg.arousal = trial.arousal;
      seg.subject_id = trial.subject_id;
      seg.achieved_snr_db = inj.achieved_snr_db;
      out.segments.push_back(std::move(seg));
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& file, const Dataset& data) {
  for (const auto& s : data.segments)
    if (s.clean.shape() != Shape{data.channels, data.samples} || s.noisy.shape() != s.clean.shape())
      throw ShapeError("segment shape " + shape_str(s.clean.shape()) + " does not match dataset [" +
                       std::to_string(data.channels) + "x" + std::to_string(data.samples) + "]");
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + file.string() + " for writing");
  binio::put_magic(os, "FDCD");
  binio::put<std::uint32_t>(os, kDatasetVersion);
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(data.channels));
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(data.samples));
  binio::put<std::uint64_t>(os, data.segments.size());
  for (const auto& s : data.segments) {
    binio::put<std::uint32_t>(os, s.subject_id);
    binio::put<std::uint8_t>(os, s.valence);
    binio::put<std::uint8_t>(os, s.arousal);
    binio::put<double>(os, s.achieved_snr_db);
    binio::put_f64s(os, s.clean.data());
    binio::put_f64s(os, s.noisy.data());
  }
  if (!os) throw FormatError("write failed for " + file.string());
}

Dataset read_dataset(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw FormatError("cannot open " + file.string());
  binio::expect_magic(is, "FDCD");
  const auto version = binio::get<std::uint32_t>(is, "version");
  if (version != kDatasetVersion)
    throw FormatError("unsupported dataset version " + std::to_string(version) + " in " + file.string());
  Dataset out;
  out.channels = binio::get<std::uint32_t>(is, "channel count");
  out.samples = binio::get<std::uint32_t>(is, "sample count");
  const auto count = binio::get<std::uint64_t>(is, "segment count");
  const std::uint64_t per_segment = 4 + 1 + 1 + 8 + 2 * 8 * static_cast<std::uint64_t>(out.channels) * out.samples;
  if (count > 0 && (out.channels == 0 || out.samples == 0))
    throw FormatError("dataset header declares zero-sized segments");
  const auto left = binio::remaining(is);
  if (count > left / per_segment)
    throw FormatError("truncated file: header declares " + std::to_string(count) + " segments but only " +
                      std::to_string(left) + " payload bytes remain");
  const std::size_t n = out.channels * out.samples;
  out.segments.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    EegSegment s;
    s.subject_id = binio::get<std::uint32_t>(is, "subject id");
    s.valence = binio::get<std::uint8_t>(is, "valence");
    s.arousal = binio::get<std::uint8_t>(is, "arousal");
    if (s.valence > 1 || s.arousal > 1) throw FormatError("label out of range in segment " + std::to_string(i));
    s.achieved_snr_db = binio::get<double>(is, "achieved snr");
    std::vector<double> clean(n), noisy(n);
    binio::get_f64s(is, clean, "clean samples");
    binio::get_f64s(is, noisy, "noisy samples");
    s.clean = Tensor({out.channels, out.samples}, std::move(clean));
    s.noisy = Tensor({out.channels, out.samples}, std::move(noisy));
    out.segments.push_back(std::move(s));
  }
  if (binio::remaining(is) != 0) throw FormatError("trailing bytes after " + std::to_string(count) + " segments");
  return out;
}

}  // namespace fdcnet
