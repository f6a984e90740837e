#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fdcnet/tensor.hpp"

namespace fdcnet {

// Learnable tensors and non-learnable buffers (batch-norm running stats,
// model metadata), each under a stable dotted path such as
// "encoder.gate.w1". Iteration is in sorted path order.
class ParamStore {
 public:
  // Registers a trainable leaf; the tensor is marked requires_grad.
  Tensor& add(const std::string& path, Tensor init);
  Tensor& add_buffer(const std::string& path, Tensor init);

  bool contains(const std::string& path) const;
  Tensor& get(const std::string& path);
  const Tensor& get(const std::string& path) const;

  std::map<std::string, Tensor>& params() { return params_; }
  const std::map<std::string, Tensor>& params() const { return params_; }
  std::map<std::string, Tensor>& buffers() { return buffers_; }
  const std::map<std::string, Tensor>& buffers() const { return buffers_; }

  std::size_t parameter_count() const;
  void zero_grad();

  // Every parameter and buffer, sorted by path.
  std::map<std::string, Tensor> snapshot() const;

  // Overwrites values of existing entries from `records`. Missing or
  // mis-shaped entries are a FormatError.
  void load(const std::map<std::string, Tensor>& records);

 private:
  std::map<std::string, Tensor> params_;
  std::map<std::string, Tensor> buffers_;
};

// FDCN container: "FDCN", u32 version, u64 record count, then per record
// (sorted by path): u32 path length, path bytes, u32 rank, u64 dims, f64
// payload. All little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& file, const std::map<std::string, Tensor>& records);
std::map<std::string, Tensor> read_checkpoint(const std::filesystem::path& file);

// FNV-1a over the container bytes; used to verify that evaluation leaves a
// model untouched.
std::uint64_t checkpoint_hash(const std::map<std::string, Tensor>& records);

}  // namespace fdcnet
