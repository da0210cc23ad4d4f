#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ammsnn/error.hpp"
#include "ammsnn/rng.hpp"
#include "ammsnn/tensor.hpp"

namespace ammsnn {

enum class EncoderVariant { msnn, single_cnn, multi_cnn };

inline std::string to_string(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::msnn: return "msnn";
    case EncoderVariant::single_cnn: return "single_cnn";
    case EncoderVariant::multi_cnn: return "multi_cnn";
  }
  return "?";
}

inline EncoderVariant encoder_variant_from(const std::string& s) {
  if (s == "msnn") return EncoderVariant::msnn;
  if (s == "single_cnn") return EncoderVariant::single_cnn;
  if (s == "multi_cnn") return EncoderVariant::multi_cnn;
  throw ConfigError("unknown encoder variant: " + s);
}

// msnn runs parallel convolution branches of distinct odd widths directly on
// the embedding matrix and concatenates their channels. single_cnn is one
// conv layer; multi_cnn stacks `layers` conv layers of the same width with
// the activation between them.
struct EncoderConfig {
  EncoderVariant variant = EncoderVariant::msnn;
  std::vector<int> branch_widths = {1, 3, 5};
  std::vector<int> branch_channels = {100, 100, 100};
  int width = 3;      // single_cnn / multi_cnn
  int channels = 300;  // single_cnn / multi_cnn
  int layers = 2;      // multi_cnn
  Activation activation = Activation::relu;

  int c_total() const {
    if (variant == EncoderVariant::msnn) {
      int c = 0;
      for (int b : branch_channels) c += b;
      return c;
    }
    return channels;
  }

  void validate() const {
    if (variant == EncoderVariant::msnn) {
      if (branch_widths.empty() || branch_widths.size() != branch_channels.size())
        throw ConfigError("msnn: branch widths and channel counts must align and be nonempty");
      for (std::size_t i = 0; i < branch_widths.size(); ++i) {
        if (branch_widths[i] <= 0 || branch_widths[i] % 2 == 0)
          throw ConfigError("msnn: branch widths must be odd positives, got " +
                            std::to_string(branch_widths[i]));
        if (branch_channels[i] <= 0) throw ConfigError("msnn: branch channel counts must be positive");
        for (std::size_t j = 0; j < i; ++j)
          if (branch_widths[j] == branch_widths[i])
            throw ConfigError("msnn: branch widths must be distinct");
      }
    } else {
      if (width <= 0 || width % 2 == 0)
        throw ConfigError("encoder width must be odd positive, got " + std::to_string(width));
      if (channels <= 0) throw ConfigError("encoder channel count must be positive");
      if (variant == EncoderVariant::multi_cnn && layers < 1)
        throw ConfigError("multi_cnn needs at least one layer");
    }
  }
};

struct ConvLayerParams {
  Tensor filters;  // c x d_in x k
  Tensor bias;     // c
};

// One entry per msnn branch, or per layer for single/multi variants.
struct EncoderParams {
  std::vector<ConvLayerParams> layers;
};

inline ConvLayerParams init_conv_layer(int channels, int depth, int width, Rng& rng) {
  ConvLayerParams p;
  p.filters = Tensor::zeros({channels, depth, width}, /*requires_grad=*/true);
  p.bias = Tensor::zeros({channels}, /*requires_grad=*/true);
  // Fan-in scaled uniform init keeps pre-activation variance near 1.
  const double r = std::sqrt(1.0 / (static_cast<double>(depth) * width));
  for (double& v : p.filters.data()) v = rng.uniform(-r, r);
  return p;
}

inline EncoderParams init_encoder_params(const EncoderConfig& cfg, int embed_dim, Rng& rng) {
  cfg.validate();
  EncoderParams params;
  switch (cfg.variant) {
    case EncoderVariant::msnn:
      for (std::size_t b = 0; b < cfg.branch_widths.size(); ++b)
        params.layers.push_back(init_conv_layer(cfg.branch_channels[b], embed_dim,
                                                cfg.branch_widths[b], rng));
      break;
    case EncoderVariant::single_cnn:
      params.layers.push_back(init_conv_layer(cfg.channels, embed_dim, cfg.width, rng));
      break;
    case EncoderVariant::multi_cnn:
      params.layers.push_back(init_conv_layer(cfg.channels, embed_dim, cfg.width, rng));
      for (int l = 1; l < cfg.layers; ++l)
        params.layers.push_back(init_conv_layer(cfg.channels, cfg.channels, cfg.width, rng));
      break;
  }
  return params;
}

// Convolution outputs for one sentence: c_total x L values plus the true
// (unpadded) length, which every max-pooling step uses to exclude padding.
struct FeatureMap {
  Tensor values;
  int true_len = 0;
};

inline Tensor branch_forward(Tape& tape, const Tensor& emb, const ConvLayerParams& params,
                             Activation act) {
  return tape.activation(tape.conv1d_same(emb, params.filters, params.bias), act);
}

inline FeatureMap encode_feature_map(Tape& tape, const Tensor& emb, int true_len,
                                     const EncoderConfig& cfg, const EncoderParams& params) {
  cfg.validate();
  FeatureMap fm;
  fm.true_len = true_len;
  switch (cfg.variant) {
    case EncoderVariant::msnn: {
      Tensor acc;
      for (std::size_t b = 0; b < params.layers.size(); ++b) {
        Tensor branch = branch_forward(tape, emb, params.layers[b], cfg.activation);
        acc = b == 0 ? branch : tape.concat(acc, branch, 0);
      }
      fm.values = acc;
      break;
    }
    case EncoderVariant::single_cnn:
      fm.values = branch_forward(tape, emb, params.layers[0], cfg.activation);
      break;
    case EncoderVariant::multi_cnn: {
      Tensor x = emb;
      for (const auto& layer : params.layers) x = branch_forward(tape, x, layer, cfg.activation);
      fm.values = x;
      break;
    }
  }
  return fm;
}

// Per-channel max over the unmasked columns: the attention-free sentence
// representation.
inline Tensor pool_encoding(Tape& tape, const FeatureMap& fm) {
  if (fm.true_len < 1) throw DataError("pool_encoding: true length must be >= 1");
  Tensor valid = fm.true_len < fm.values.dim(1)
                     ? tape.slice(fm.values, 1, 0, fm.true_len)
                     : fm.values;
  return tape.max_reduce(valid, Axis::rows).values;
}

}  // namespace ammsnn
