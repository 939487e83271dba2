#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "amddx/datamodel.hpp"
#include "amddx/rng.hpp"
#include "amddx/tensor.hpp"

namespace amddx {

// Convolutional trunk description. Each inner list is one block of 3x3
// stride-1 pad-1 convolutions; a 2x2 stride-2 max pool follows every block
// except the last, so spatial dims shrink by 2^(blocks-1).
struct ModelConfig {
  std::vector<std::vector<int>> block_channels;
  int input_channels = 3;
  int n_lesions = kNumLesions;
  int pool_output = 31;

  static ModelConfig preset(const std::string& name) {
    ModelConfig cfg;
    if (name == "full" || name == "vgg13") {
      cfg.block_channels = {{64, 64}, {128, 128}, {256, 256}, {512, 512}, {512, 512}};
    } else if (name == "desk") {
      cfg.block_channels = {{8, 8}, {16, 16}, {32, 32}, {32, 32}, {32, 32}};
    } else {
      throw std::invalid_argument("unknown model preset: " + name);
    }
    return cfg;
  }

  void validate() const {
    if (block_channels.empty()) throw std::invalid_argument("model needs at least one block");
    for (const auto& block : block_channels) {
      if (block.empty()) throw std::invalid_argument("empty conv block");
      for (int c : block)
        if (c < 1) throw std::invalid_argument("channel counts must be >= 1");
    }
    if (input_channels < 1) throw std::invalid_argument("input_channels must be >= 1");
    if (n_lesions < 1) throw std::invalid_argument("n_lesions must be >= 1");
    if (pool_output < 1) throw std::invalid_argument("pool_output must be >= 1");
  }

  int blocks() const { return static_cast<int>(block_channels.size()); }
  int trunk_output_channels() const { return block_channels.back().back(); }
  int downsample_factor() const { return 1 << (blocks() - 1); }
  int fc_inputs() const { return n_lesions * pool_output * pool_output; }
  int outputs() const { return n_lesions + 1; }
  int min_input_dim() const { return 2 * downsample_factor(); }
};

template <typename Scalar>
struct ConvParams {
  MatrixX<Scalar> weight;  // (in_channels * taps) x out_channels
  MatrixX<Scalar> bias;    // 1 x out_channels
};

template <typename Scalar>
struct ModelParams {
  std::vector<std::vector<ConvParams<Scalar>>> trunk;
  ConvParams<Scalar> head_conv;  // 1x1: weight is in_channels x n_lesions
  MatrixX<Scalar> fc_weight;     // fc_inputs x (n_lesions + 1)
  MatrixX<Scalar> fc_bias;       // 1 x (n_lesions + 1)
};

// Visits every parameter array in a fixed order with a stable name. The order
// defines the archive layout and the optimizer's state pairing.
template <typename Params, typename Fn>
void for_each_array(Params& p, Fn&& fn) {
  for (std::size_t b = 0; b < p.trunk.size(); ++b)
    for (std::size_t c = 0; c < p.trunk[b].size(); ++c) {
      const std::string base = "trunk.b" + std::to_string(b) + ".c" + std::to_string(c);
      fn(base + "/weight", p.trunk[b][c].weight);
      fn(base + "/bias", p.trunk[b][c].bias);
    }
  fn("head.conv/weight", p.head_conv.weight);
  fn("head.conv/bias", p.head_conv.bias);
  fn("fc/weight", p.fc_weight);
  fn("fc/bias", p.fc_bias);
}

template <typename Scalar>
std::vector<MatrixX<Scalar>*> array_pointers(ModelParams<Scalar>& p) {
  std::vector<MatrixX<Scalar>*> out;
  for_each_array(p, [&](const std::string&, MatrixX<Scalar>& m) { out.push_back(&m); });
  return out;
}

template <typename Scalar>
std::vector<const MatrixX<Scalar>*> array_pointers(const ModelParams<Scalar>& p) {
  std::vector<const MatrixX<Scalar>*> out;
  for_each_array(p, [&](const std::string&, const MatrixX<Scalar>& m) { out.push_back(&m); });
  return out;
}

template <typename Scalar>
ModelParams<Scalar> make_params(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams<Scalar> p;
  int cin = cfg.input_channels;
  p.trunk.resize(cfg.block_channels.size());
  for (std::size_t b = 0; b < cfg.block_channels.size(); ++b) {
    for (int cout : cfg.block_channels[b]) {
      ConvParams<Scalar> conv;
      conv.weight = MatrixX<Scalar>::Zero(static_cast<Eigen::Index>(cin) * 9, cout);
      conv.bias = MatrixX<Scalar>::Zero(1, cout);
      p.trunk[b].push_back(std::move(conv));
      cin = cout;
    }
  }
  p.head_conv.weight = MatrixX<Scalar>::Zero(cfg.trunk_output_channels(), cfg.n_lesions);
  p.head_conv.bias = MatrixX<Scalar>::Zero(1, cfg.n_lesions);
  p.fc_weight = MatrixX<Scalar>::Zero(cfg.fc_inputs(), cfg.outputs());
  p.fc_bias = MatrixX<Scalar>::Zero(1, cfg.outputs());
  return p;
}

template <typename Scalar>
void fill_he_uniform(MatrixX<Scalar>& w, Eigen::Index fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
}

// He-uniform weights, zero biases. The trunk and the head draw from separate
// derived streams so head initialization is unchanged when the trunk is later
// replaced by pretrained weights.
//
// The fc starts with a class-activation prior: the diagnosis output reads
// every pooled cell, while lesion output i is born as the mean of channel i's
// cells and zero elsewhere. The dense layer stays free to reshape this, but
// the symmetry between map channels is broken toward one evidence map per
// class, which is what makes the exported maps localize.
template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<Scalar> p = make_params<Scalar>(cfg);
  Rng trunk_rng(derive_seed(seed, 0));
  for (auto& block : p.trunk)
    for (auto& conv : block) fill_he_uniform(conv.weight, conv.weight.rows(), trunk_rng);
  Rng head_rng(derive_seed(seed, 1));
  fill_he_uniform(p.head_conv.weight, p.head_conv.weight.rows(), head_rng);
  const double fc_bound = std::sqrt(6.0 / static_cast<double>(p.fc_weight.rows()));
  for (Eigen::Index r = 0; r < p.fc_weight.rows(); ++r)
    p.fc_weight(r, 0) = static_cast<Scalar>(head_rng.uniform(-fc_bound, fc_bound));
  const int cells = cfg.pool_output * cfg.pool_output;
  for (int lesion = 0; lesion < cfg.n_lesions; ++lesion)
    for (int cell = 0; cell < cells; ++cell)
      p.fc_weight(static_cast<Eigen::Index>(lesion) * cells + cell, lesion + 1) =
          static_cast<Scalar>(1.0 / cells);
  return p;
}

// Per-channel input standardization attached to pretrained trunks.
struct Normalization {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
};

template <typename Scalar>
void apply_normalization(Tensor<Scalar>& t, const Normalization& n) {
  for (int c = 0; c < t.channels(); ++c)
    t.data.col(c) =
        (t.data.col(c).array() - Scalar(n.mean[c % 3])) / Scalar(n.stddev[c % 3]);
  zero_border(t);
}

// 3x3 convolution + bias + ReLU on a pad-1 tensor, computed as nine shifted
// whole-plane products. Border rows pick up wrap garbage and bias; both are
// erased by the final border clear, and interior pixels only ever read the
// zeroed pad ring.
template <typename Scalar>
Tensor<Scalar> conv3x3_relu(const Tensor<Scalar>& x, const ConvParams<Scalar>& p) {
  const int cin = x.channels();
  const Eigen::Index cout = p.weight.cols();
  if (x.pad != 1) throw std::invalid_argument("conv3x3 input must carry a 1-pixel border");
  if (p.weight.rows() != static_cast<Eigen::Index>(cin) * 9)
    throw std::invalid_argument("conv3x3 weight shape mismatch");
  Tensor<Scalar> y(x.height, x.width, static_cast<int>(cout), 1);
  const Eigen::Index n = x.data.rows();
  const int pw = x.padded_width();
  for (int k = 0; k < 9; ++k) {
    const int dy = k / 3 - 1, dx = k % 3 - 1;
    const Eigen::Index s = static_cast<Eigen::Index>(dy) * pw + dx;
    const Eigen::Index a = std::max<Eigen::Index>(0, s);
    const Eigen::Index b = std::max<Eigen::Index>(0, -s);
    const Eigen::Index len = n - std::abs(s);
    y.data.middleRows(b, len).noalias() +=
        x.data.middleRows(a, len) * p.weight.middleRows(static_cast<Eigen::Index>(k) * cin, cin);
  }
  y.data.rowwise() += p.bias.row(0);
  y.data = y.data.cwiseMax(Scalar(0));
  zero_border(y);
  return y;
}

// Gradients of conv3x3_relu. dy arrives w.r.t. the post-ReLU output and is
// masked in place; dx is skipped when null (first layer).
template <typename Scalar>
void conv3x3_relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& y, Tensor<Scalar>& dy,
                           const MatrixX<Scalar>& weight, MatrixX<Scalar>& dweight,
                           MatrixX<Scalar>& dbias, Tensor<Scalar>* dx) {
  const int cin = x.channels();
  const Eigen::Index n = x.data.rows();
  const int pw = x.padded_width();
  dy.data = dy.data.cwiseProduct((y.data.array() > Scalar(0)).template cast<Scalar>().matrix());
  dbias = dy.data.colwise().sum();
  if (dx) *dx = Tensor<Scalar>(x.height, x.width, cin, 1);
  for (int k = 0; k < 9; ++k) {
    const int dyy = k / 3 - 1, dxx = k % 3 - 1;
    const Eigen::Index s = static_cast<Eigen::Index>(dyy) * pw + dxx;
    const Eigen::Index a = std::max<Eigen::Index>(0, s);
    const Eigen::Index b = std::max<Eigen::Index>(0, -s);
    const Eigen::Index len = n - std::abs(s);
    dweight.middleRows(static_cast<Eigen::Index>(k) * cin, cin).noalias() =
        x.data.middleRows(a, len).transpose() * dy.data.middleRows(b, len);
    if (dx)
      dx->data.middleRows(a, len).noalias() +=
          dy.data.middleRows(b, len) * weight.middleRows(static_cast<Eigen::Index>(k) * cin, cin).transpose();
  }
  if (dx) zero_border(*dx);
}

template <typename Scalar>
Tensor<Scalar> conv1x1_relu(const Tensor<Scalar>& x, const ConvParams<Scalar>& p) {
  if (p.weight.rows() != x.channels()) throw std::invalid_argument("conv1x1 weight shape mismatch");
  Tensor<Scalar> y(x.height, x.width, static_cast<int>(p.weight.cols()), x.pad);
  y.data.noalias() = x.data * p.weight;
  y.data.rowwise() += p.bias.row(0);
  y.data = y.data.cwiseMax(Scalar(0));
  zero_border(y);
  return y;
}

// 2x2 stride-2 max pool; odd trailing rows/columns are dropped. argmax rows
// index into the input tensor's padded storage, ties resolve to scan order.
template <typename Scalar>
Tensor<Scalar> maxpool2(const Tensor<Scalar>& x, Eigen::MatrixXi* argmax) {
  const int oh = x.height / 2, ow = x.width / 2, channels = x.channels();
  if (oh < 1 || ow < 1) throw std::invalid_argument("maxpool2 input too small");
  Tensor<Scalar> y(oh, ow, channels, x.pad);
  if (argmax) argmax->resize(static_cast<Eigen::Index>(oh) * ow, channels);
  for (int c = 0; c < channels; ++c)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        Eigen::Index best_row = x.row_index(2 * oy, 2 * ox);
        Scalar best = x.data(best_row, c);
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const Eigen::Index r = x.row_index(2 * oy + dy, 2 * ox + dx);
            if (x.data(r, c) > best) {
              best = x.data(r, c);
              best_row = r;
            }
          }
        y.data(y.row_index(oy, ox), c) = best;
        if (argmax) (*argmax)(static_cast<Eigen::Index>(oy) * ow + ox, c) = static_cast<int>(best_row);
      }
  return y;
}

template <typename Scalar>
void maxpool2_backward(const Eigen::MatrixXi& argmax, const Tensor<Scalar>& dy, Tensor<Scalar>& dx) {
  for (int c = 0; c < dy.channels(); ++c)
    for (int oy = 0; oy < dy.height; ++oy)
      for (int ox = 0; ox < dy.width; ++ox)
        dx.data(argmax(static_cast<Eigen::Index>(oy) * dy.width + ox, c), c) +=
            dy.data(dy.row_index(oy, ox), c);
}

// Max over the window rows [floor(i*h/out), ceil((i+1)*h/out)) and the
// analogous columns; windows overlap or repeat when the input is smaller than
// the output grid. Result rows are ordered i*out+j; argmax stores input
// storage rows.
template <typename Scalar>
MatrixX<Scalar> adaptive_max_pool(const Tensor<Scalar>& x, int out, Eigen::MatrixXi* argmax) {
  if (out < 1) throw std::invalid_argument("adaptive pool output must be >= 1");
  const int channels = x.channels();
  MatrixX<Scalar> pooled(static_cast<Eigen::Index>(out) * out, channels);
  if (argmax) argmax->resize(pooled.rows(), channels);
  for (int i = 0; i < out; ++i) {
    const int y0 = (i * x.height) / out;
    const int y1 = ((i + 1) * x.height + out - 1) / out;
    for (int j = 0; j < out; ++j) {
      const int x0 = (j * x.width) / out;
      const int x1 = ((j + 1) * x.width + out - 1) / out;
      for (int c = 0; c < channels; ++c) {
        Eigen::Index best_row = x.row_index(y0, x0);
        Scalar best = x.data(best_row, c);
        for (int y = y0; y < y1; ++y)
          for (int xx = x0; xx < x1; ++xx) {
            const Eigen::Index r = x.row_index(y, xx);
            if (x.data(r, c) > best) {
              best = x.data(r, c);
              best_row = r;
            }
          }
        pooled(static_cast<Eigen::Index>(i) * out + j, c) = best;
        if (argmax) (*argmax)(static_cast<Eigen::Index>(i) * out + j, c) = static_cast<int>(best_row);
      }
    }
  }
  return pooled;
}

template <typename Scalar>
struct ForwardTrace {
  Tensor<Scalar> input;  // padded network input
  std::vector<std::vector<Tensor<Scalar>>> conv_out;
  std::vector<Tensor<Scalar>> pool_out;
  std::vector<Eigen::MatrixXi> pool_argmax;
  Tensor<Scalar> maps;  // head conv output, one channel per lesion
  Eigen::MatrixXi map_argmax;
  MatrixX<Scalar> pooled;  // (pool_output^2) x n_lesions
  RowVectorX<Scalar> logits;
  RowVectorX<Scalar> probs;
};

template <typename Scalar>
Tensor<Scalar> trunk_forward(const ModelParams<Scalar>& params, const ModelConfig& cfg,
                             const Tensor<Scalar>& image, ForwardTrace<Scalar>* trace = nullptr) {
  if (image.height < cfg.min_input_dim() || image.width < cfg.min_input_dim())
    throw std::invalid_argument("input smaller than " + std::to_string(cfg.min_input_dim()) +
                                " per side");
  if (image.channels() != cfg.input_channels)
    throw std::invalid_argument("input channel count mismatch");
  Tensor<Scalar> cur = with_pad(image, 1);
  if (trace) {
    trace->input = cur;
    trace->conv_out.assign(params.trunk.size(), {});
    trace->pool_out.clear();
    trace->pool_argmax.assign(params.trunk.size() - 1, {});
  }
  for (std::size_t b = 0; b < params.trunk.size(); ++b) {
    for (const auto& conv : params.trunk[b]) {
      cur = conv3x3_relu(cur, conv);
      if (trace) trace->conv_out[b].push_back(cur);
    }
    if (b + 1 < params.trunk.size()) {
      cur = maxpool2(cur, trace ? &trace->pool_argmax[b] : nullptr);
      if (trace) trace->pool_out.push_back(cur);
    }
  }
  return cur;
}

template <typename Scalar>
RowVectorX<Scalar> head_forward(const ModelParams<Scalar>& params, const ModelConfig& cfg,
                                const Tensor<Scalar>& features, ForwardTrace<Scalar>* trace = nullptr) {
  Tensor<Scalar> maps = conv1x1_relu(features, params.head_conv);
  Eigen::MatrixXi argmax;
  MatrixX<Scalar> pooled =
      adaptive_max_pool(maps, cfg.pool_output, trace ? &argmax : nullptr);
  // Flatten channel-major then row then column: exactly the column-major
  // storage order of `pooled`.
  Eigen::Map<const VectorX<Scalar>> flat(pooled.data(), pooled.size());
  RowVectorX<Scalar> logits = flat.transpose() * params.fc_weight + params.fc_bias.row(0);
  RowVectorX<Scalar> probs(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    probs[i] = Scalar(1) / (Scalar(1) + std::exp(-logits[i]));
  if (trace) {
    trace->maps = std::move(maps);
    trace->map_argmax = std::move(argmax);
    trace->pooled = std::move(pooled);
    trace->logits = logits;
    trace->probs = probs;
  }
  return probs;
}

template <typename Scalar>
RowVectorX<Scalar> model_forward(const ModelParams<Scalar>& params, const ModelConfig& cfg,
                                 const Tensor<Scalar>& image, ForwardTrace<Scalar>* trace = nullptr) {
  Tensor<Scalar> features = trunk_forward(params, cfg, image, trace);
  return head_forward(params, cfg, features, trace);
}

// Reverse pass for d(loss)/d(logits); writes every gradient array in `grads`
// (shapes from make_params). Gradient w.r.t. the image itself is not formed.
template <typename Scalar>
void model_backward(const ModelParams<Scalar>& params, const ModelConfig& cfg,
                    const ForwardTrace<Scalar>& trace, const RowVectorX<Scalar>& dlogits,
                    ModelParams<Scalar>& grads) {
  // Fully connected layer.
  Eigen::Map<const VectorX<Scalar>> flat(trace.pooled.data(), trace.pooled.size());
  grads.fc_weight.noalias() = flat * dlogits;
  grads.fc_bias = dlogits;
  VectorX<Scalar> dflat = params.fc_weight * dlogits.transpose();
  Eigen::Map<const MatrixX<Scalar>> dpooled(dflat.data(), trace.pooled.rows(), trace.pooled.cols());

  // Unpool into the activation maps, then the ReLU mask.
  const Tensor<Scalar>& maps = trace.maps;
  Tensor<Scalar> dmaps(maps.height, maps.width, maps.channels(), maps.pad);
  for (int c = 0; c < maps.channels(); ++c)
    for (Eigen::Index i = 0; i < dpooled.rows(); ++i)
      dmaps.data(trace.map_argmax(i, c), c) += dpooled(i, c);
  dmaps.data = dmaps.data.cwiseProduct((maps.data.array() > Scalar(0)).template cast<Scalar>().matrix());

  // 1x1 head conv. Border rows are zero on both factors.
  const Tensor<Scalar>& features = trace.conv_out.back().back();
  grads.head_conv.weight.noalias() = features.data.transpose() * dmaps.data;
  grads.head_conv.bias = dmaps.data.colwise().sum();
  Tensor<Scalar> g(features.height, features.width, features.channels(), features.pad);
  g.data.noalias() = dmaps.data * params.head_conv.weight.transpose();
  zero_border(g);

  // Trunk blocks in reverse.
  for (int b = static_cast<int>(params.trunk.size()) - 1; b >= 0; --b) {
    for (int c = static_cast<int>(params.trunk[b].size()) - 1; c >= 0; --c) {
      const Tensor<Scalar>& x = c > 0 ? trace.conv_out[b][c - 1]
                                      : (b > 0 ? trace.pool_out[b - 1] : trace.input);
      const Tensor<Scalar>& y = trace.conv_out[b][c];
      const bool first_layer = b == 0 && c == 0;
      Tensor<Scalar> dx;
      conv3x3_relu_backward(x, y, g, params.trunk[b][c].weight, grads.trunk[b][c].weight,
                            grads.trunk[b][c].bias, first_layer ? nullptr : &dx);
      if (!first_layer) g = std::move(dx);
    }
    if (b > 0) {
      const Tensor<Scalar>& pre = trace.conv_out[b - 1].back();
      Tensor<Scalar> dpre(pre.height, pre.width, pre.channels(), pre.pad);
      maxpool2_backward(trace.pool_argmax[b - 1], g, dpre);
      g = std::move(dpre);
    }
  }
}

// One channel of the interior as a height x width matrix.
template <typename Scalar>
MatrixX<Scalar> plane(const Tensor<Scalar>& t, int channel) {
  MatrixX<Scalar> out(t.height, t.width);
  for (int y = 0; y < t.height; ++y)
    out.row(y) = t.data.col(channel).segment(t.row_index(y, 0), t.width).transpose();
  return out;
}

template <typename Scalar>
PredictionRecord classify(const ModelParams<Scalar>& params, const ModelConfig& cfg,
                          const Tensor<Scalar>& image, bool want_maps = true) {
  ForwardTrace<Scalar> trace;
  RowVectorX<Scalar> probs = model_forward(params, cfg, image, want_maps ? &trace : nullptr);
  PredictionRecord rec;
  rec.probabilities = probs.template cast<double>().transpose();
  if (want_maps)
    for (int c = 0; c < cfg.n_lesions; ++c)
      rec.activation_maps.push_back(plane(trace.maps, c).template cast<double>());
  return rec;
}

}  // namespace amddx
