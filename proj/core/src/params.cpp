#include "fdcnet/params.hpp"

#include <fstream>
#include <sstream>

#include "fdcnet/binio.hpp"

namespace fdcnet {

Tensor& ParamStore::add(const std::string& path, Tensor init) {
  if (contains(path)) throw ConfigError("duplicate parameter path '" + path + "'");
  auto t = init.clone(true);
  t.set_name(path);
  return params_.emplace(path, std::move(t)).first->second;
}

Tensor& ParamStore::add_buffer(const std::string& path, Tensor init) {
  if (contains(path)) throw ConfigError("duplicate buffer path '" + path + "'");
  auto t = init.clone(false);
  t.set_name(path);
  return buffers_.emplace(path, std::move(t)).first->second;
}

bool ParamStore::contains(const std::string& path) const {
  return params_.count(path) != 0 || buffers_.count(path) != 0;
}

Tensor& ParamStore::get(const std::string& path) {
  if (auto it = params_.find(path); it != params_.end()) return it->second;
  if (auto it = buffers_.find(path); it != buffers_.end()) return it->second;
  throw ConfigError("no parameter at path '" + path + "'");
}

const Tensor& ParamStore::get(const std::string& path) const {
  return const_cast<ParamStore*>(this)->get(path);
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

std::map<std::string, Tensor> ParamStore::snapshot() const {
  std::map<std::string, Tensor> out;
  for (const auto& [p, t] : params_) out.emplace(p, t.detach());
  for (const auto& [p, t] : buffers_) out.emplace(p, t.detach());
  return out;
}

void ParamStore::load(const std::map<std::string, Tensor>& records) {
  for (auto* group : {&params_, &buffers_})
    for (auto& [path, t] : *group) {
      auto it = records.find(path);
      if (it == records.end()) throw FormatError("checkpoint is missing '" + path + "'");
      if (it->second.shape() != t.shape())
        throw FormatError("checkpoint entry '" + path + "' has shape " + shape_str(it->second.shape()) +
                          ", model expects " + shape_str(t.shape()));
      auto dst = t.mutable_data();
      auto src = it->second.data();
      std::copy(src.begin(), src.end(), dst.begin());
    }
}

namespace {

void write_records(std::ostream& os, const std::map<std::string, Tensor>& records) {
  binio::put_magic(os, "FDCN");
  binio::put<std::uint32_t>(os, kCheckpointVersion);
  binio::put<std::uint64_t>(os, records.size());
  for (const auto& [path, t] : records) {
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(path.size()));
    os.write(path.data(), static_cast<std::streamsize>(path.size()));
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.ndim()));
    for (auto d : t.shape()) binio::put<std::uint64_t>(os, d);
    binio::put_f64s(os, t.data());
  }
}

}  // namespace

void write_checkpoint(const std::filesystem::path& file, const std::map<std::string, Tensor>& records) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open '" + file.string() + "' for writing");
  write_records(os, records);
  if (!os) throw FormatError("write failed for '" + file.string() + "'");
}

std::map<std::string, Tensor> read_checkpoint(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint '" + file.string() + "'");
  binio::expect_magic(is, "FDCN");
  const auto version = binio::get<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto count = binio::get<std::uint64_t>(is, "record count");
  std::map<std::string, Tensor> out;
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto len = binio::get<std::uint32_t>(is, "path length");
    if (len > binio::remaining(is)) throw FormatError("truncated file while reading path");
    std::string path(len, '\0');
    is.read(path.data(), len);
    const auto rank = binio::get<std::uint32_t>(is, "rank");
    Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = binio::get<std::uint64_t>(is, "dims");
      n *= d;
    }
    if (n * sizeof(double) > binio::remaining(is))
      throw FormatError("truncated file while reading payload of '" + path + "'");
    std::vector<double> data(n);
    binio::get_f64s(is, data, "payload");
    out.emplace(path, Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

std::uint64_t checkpoint_hash(const std::map<std::string, Tensor>& records) {
  std::ostringstream os(std::ios::binary);
  write_records(os, records);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace fdcnet
