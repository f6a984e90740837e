#include "fdcnet/model.hpp"

#include <cmath>

#include "fdcnet/denoiser.hpp"
#include "fdcnet/ops.hpp"

namespace fdcnet {

using namespace fdcnet::ops;

namespace {

constexpr std::size_t kStemKernel = 7;
constexpr std::size_t kStemPadding = 3;

}  // namespace

ModelConfig ModelConfig::full() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.channels = 8;
  c.d_model = 32;
  c.n_layers = 1;
  c.n_heads = 4;
  c.freq_heads = 2;
  c.ff_dim = 64;
  return c;
}

void ModelConfig::validate() const {
  if (channels == 0) throw ConfigError("channels must be >= 1");
  if (!no_eegsp && (gate_reduction == 0 || channels % gate_reduction != 0))
    throw ConfigError("gate reduction " + std::to_string(gate_reduction) + " must divide channels " +
                      std::to_string(channels));
  if (cls_hidden == 0) throw ConfigError("cls_hidden must be >= 1");
  if (t_fb == 0) throw ConfigError("t_fb must be >= 1");
  if (d_model < 8) throw ConfigError("d_model must be >= 8");
  encoder().validate();
}

eegsp::EncoderConfig ModelConfig::encoder() const {
  eegsp::EncoderConfig e;
  e.d_model = d_model;
  e.n_layers = n_layers;
  e.n_heads = n_heads;
  e.freq_heads = no_eegsp ? 0 : freq_heads;
  e.ff_dim = ff_dim;
  e.dropout = dropout;
  e.post_norm = post_norm;
  e.band_pe = !no_eegsp;
  e.max_positions = max_positions;
  return e;
}

feedback::Options ModelConfig::feedback() const { return {t_fb, !no_feedback, !no_cross}; }

FdcNet::FdcNet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const auto D = cfg_.d_model, C = cfg_.channels;
  if (!cfg_.no_eegsp) eegsp::init_gate(store_, "encoder", C, cfg_.gate_reduction, seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(C * kStemKernel));
  store_.add("shared.stem.w", nn::uniform({D, C, kStemKernel}, bound, nn::path_seed(seed, "shared.stem.w")));
  store_.add("shared.stem.b", nn::uniform({D}, bound, nn::path_seed(seed, "shared.stem.b")));
  eegsp::init_encoder(store_, "encoder", cfg_.encoder(), seed);
  denoiser::init_decoder(store_, "denoiser", D, C, seed);
  classifier::init_classifier(store_, "classifier", D, cfg_.cls_hidden, seed);
  feedback::init_feedback(store_, "feedback", D, cfg_.feedback(), seed);
}

Tensor FdcNet::shared_stem(const Tensor& x_noisy) {
  if (x_noisy.ndim() != 3 || x_noisy.dim(1) != cfg_.channels)
    throw ShapeError("model expects [B x " + std::to_string(cfg_.channels) + " x T], got " +
                     shape_str(x_noisy.shape()));
  auto x = cfg_.no_eegsp ? x_noisy : eegsp::apply_gate(x_noisy, store_, "encoder");
  return gelu(conv1d(x, store_.get("shared.stem.w"), &store_.get("shared.stem.b"), 1, kStemPadding));
}

Tensor FdcNet::encode(const Tensor& stem, const nn::Mode& mode) {
  return eegsp::encoder_forward(swap_last2(stem), store_, "encoder", cfg_.encoder(), mode);
}

FdcNet::Output FdcNet::forward(const Tensor& x_noisy, const nn::Mode& mode) {
  auto stem = shared_stem(x_noisy);
  feedback::DualPathState s;
  s.h_den = encode(stem, mode);
  s.h_cls = classifier::conv_features(stem, store_, "classifier");
  const auto opt = cfg_.feedback();
  for (std::size_t t = 1; t <= opt.iterations; ++t)
    feedback::dual_path_step(s, store_, "feedback", "classifier", t, opt);
  Output out;
  out.x_hat = denoiser::reconstruct(s.h_den, x_noisy, store_, "denoiser", mode);
  out.h_den = s.h_den;
  out.h_cls = s.h_cls;
  out.pred = s.pred;
  return out;
}

FdcNet::Output FdcNet::denoise_only(const Tensor& x_noisy, const nn::Mode& mode) {
  Output out;
  out.h_den = encode(shared_stem(x_noisy), mode);
  out.x_hat = denoiser::reconstruct(out.h_den, x_noisy, store_, "denoiser", mode);
  return out;
}

classifier::Prediction FdcNet::classify_only(const Tensor& x_noisy) {
  return classifier::classify_forward(classifier::conv_features(shared_stem(x_noisy), store_, "classifier"), store_,
                                      "classifier");
}

namespace {

struct MetaField {
  const char* key;
  std::size_t ModelConfig::*size = nullptr;
  bool ModelConfig::*flag = nullptr;
  double ModelConfig::*real = nullptr;
};

const MetaField kMeta[] = {
    {"meta.channels", &ModelConfig::channels},
    {"meta.d_model", &ModelConfig::d_model},
    {"meta.n_layers", &ModelConfig::n_layers},
    {"meta.n_heads", &ModelConfig::n_heads},
    {"meta.freq_heads", &ModelConfig::freq_heads},
    {"meta.ff_dim", &ModelConfig::ff_dim},
    {"meta.gate_reduction", &ModelConfig::gate_reduction},
    {"meta.cls_hidden", &ModelConfig::cls_hidden},
    {"meta.t_fb", &ModelConfig::t_fb},
    {"meta.max_positions", &ModelConfig::max_positions},
    {"meta.dropout", nullptr, nullptr, &ModelConfig::dropout},
    {"meta.post_norm", nullptr, &ModelConfig::post_norm},
    {"meta.no_feedback", nullptr, &ModelConfig::no_feedback},
    {"meta.no_cross", nullptr, &ModelConfig::no_cross},
    {"meta.no_eegsp", nullptr, &ModelConfig::no_eegsp},
};

}  // namespace

std::map<std::string, Tensor> FdcNet::records() const {
  auto out = store_.snapshot();
  for (const auto& m : kMeta) {
    double v = m.size ? static_cast<double>(cfg_.*m.size) : m.flag ? (cfg_.*m.flag ? 1.0 : 0.0) : cfg_.*m.real;
    out.emplace(m.key, Tensor::scalar(v));
  }
  return out;
}

FdcNet FdcNet::from_records(const std::map<std::string, Tensor>& records) {
  ModelConfig cfg;
  for (const auto& m : kMeta) {
    auto it = records.find(m.key);
    if (it == records.end()) throw FormatError(std::string("checkpoint is missing '") + m.key + "'");
    const double v = it->second.data()[0];
    if (m.size) {
      if (v < 0.0 || v != std::floor(v)) throw FormatError(std::string("bad value for ") + m.key);
      cfg.*m.size = static_cast<std::size_t>(v);
    } else if (m.flag) {
      cfg.*m.flag = v != 0.0;
    } else {
      cfg.*m.real = v;
    }
  }
  FdcNet net(cfg, 0);
  net.store_.load(records);
  return net;
}

void FdcNet::save(const std::filesystem::path& file) const { write_checkpoint(file, records()); }

FdcNet FdcNet::load(const std::filesystem::path& file) { return from_records(read_checkpoint(file)); }

}  // namespace fdcnet
