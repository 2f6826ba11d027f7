// Copyright 2026 The Cleanstream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CLEANSTREAM_CONFORMER_HPP_
#define CLEANSTREAM_CONFORMER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cleanstream/binary_io.hpp"
#include "cleanstream/error.hpp"
#include "cleanstream/features.hpp"
#include "cleanstream/mask.hpp"
#include "cleanstream/rng.hpp"
#include "cleanstream/types.hpp"

namespace cleanstream {

struct ConformerConfig {
  int num_layers = 4;
  int model_dim = 256;
  int ff_dim = 1024;
  int conv_kernel = 15;
  int num_heads = 8;
  int attn_past_frames = 31;
  int input_dim = 1024;
  int output_dim = 128;

  void validate() const {
    if (num_layers < 0 || model_dim < 1 || ff_dim < 1 || conv_kernel < 1 || num_heads < 1 ||
        attn_past_frames < 0 || input_dim < 1 || output_dim < 1) {
      throw Error(Errc::kInvalidConfig, "conformer dimensions must be positive");
    }
    if (model_dim % num_heads != 0) {
      throw Error(Errc::kInvalidConfig, "model_dim must be divisible by num_heads");
    }
  }

  bool operator==(const ConformerConfig&) const = default;
};

// Closed-form parameter count of the layer layout below.
inline std::int64_t count_params(const ConformerConfig& c) {
  c.validate();
  const std::int64_t d = c.model_dim, f = c.ff_dim, k = c.conv_kernel;
  const std::int64_t norm = 2 * d;
  const std::int64_t ff = norm + (d * f + f) + (f * d + d);
  const std::int64_t conv = norm + (d * 2 * d + 2 * d) + (d * k + d) + norm + (d * d + d);
  const std::int64_t attn = norm + 4 * (d * d + d);
  const std::int64_t layer = 2 * ff + conv + attn + norm;
  return (c.input_dim * d + d) + c.num_layers * layer + (d * c.output_dim + c.output_dim);
}

template <typename Scalar>
struct Linear {
  Matrix<Scalar> weight;  // (out x in)
  Vector<Scalar> bias;

  Linear() = default;
  Linear(int in, int out) : weight(Matrix<Scalar>::Zero(out, in)), bias(Vector<Scalar>::Zero(out)) {}
};

template <typename Scalar>
struct NormWeights {
  Vector<Scalar> gamma;
  Vector<Scalar> beta;

  NormWeights() = default;
  explicit NormWeights(int dim) : gamma(Vector<Scalar>::Ones(dim)), beta(Vector<Scalar>::Zero(dim)) {}
};

template <typename Scalar>
struct FeedForwardWeights {
  NormWeights<Scalar> norm;
  Linear<Scalar> expand;
  Linear<Scalar> project;
};

// pointwise conv -> GLU -> causal depthwise conv -> group norm -> swish ->
// pointwise conv
template <typename Scalar>
struct ConvModuleWeights {
  NormWeights<Scalar> norm;
  Linear<Scalar> pointwise_in;    // d -> 2d, halves gated by GLU
  Matrix<Scalar> depthwise;       // (d x kernel), column kernel-1 hits the current frame
  Vector<Scalar> depthwise_bias;
  NormWeights<Scalar> group_norm;  // one group: normalises over channels per frame
  Linear<Scalar> pointwise_out;
};

template <typename Scalar>
struct AttentionWeights {
  NormWeights<Scalar> norm;
  Linear<Scalar> query;
  Linear<Scalar> key;
  Linear<Scalar> value;
  Linear<Scalar> output;
};

// Half-step FF, convolution, self-attention, half-step FF, final norm.
template <typename Scalar>
struct ConformerLayerWeights {
  FeedForwardWeights<Scalar> ff_first;
  ConvModuleWeights<Scalar> conv;
  AttentionWeights<Scalar> attention;
  FeedForwardWeights<Scalar> ff_second;
  NormWeights<Scalar> final_norm;
};

template <typename Scalar>
struct ConformerWeights {
  ConformerConfig config;
  Linear<Scalar> input_proj;
  std::vector<ConformerLayerWeights<Scalar>> layers;
  Linear<Scalar> output_head;
};

enum class TensorRole { kWeight, kBias, kScale };

// Visits every parameter tensor in the declared (serialisation) order.
// fn(name, tensor, role); tensor is an Eigen Matrix or Vector.
template <typename Weights, typename Fn>
void for_each_tensor(Weights& w, Fn&& fn) {
  auto linear = [&](const std::string& p, auto& lin) {
    fn(p + ".weight", lin.weight, TensorRole::kWeight);
    fn(p + ".bias", lin.bias, TensorRole::kBias);
  };
  auto norm = [&](const std::string& p, auto& n) {
    fn(p + ".gamma", n.gamma, TensorRole::kScale);
    fn(p + ".beta", n.beta, TensorRole::kBias);
  };
  auto ff = [&](const std::string& p, auto& f) {
    norm(p + ".norm", f.norm);
    linear(p + ".expand", f.expand);
    linear(p + ".project", f.project);
  };
  linear("input_proj", w.input_proj);
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    auto& layer = w.layers[i];
    const std::string p = "layer" + std::to_string(i);
    ff(p + ".ff_first", layer.ff_first);
    norm(p + ".conv.norm", layer.conv.norm);
    linear(p + ".conv.pointwise_in", layer.conv.pointwise_in);
    fn(p + ".conv.depthwise", layer.conv.depthwise, TensorRole::kWeight);
    fn(p + ".conv.depthwise_bias", layer.conv.depthwise_bias, TensorRole::kBias);
    norm(p + ".conv.group_norm", layer.conv.group_norm);
    linear(p + ".conv.pointwise_out", layer.conv.pointwise_out);
    norm(p + ".attention.norm", layer.attention.norm);
    linear(p + ".attention.query", layer.attention.query);
    linear(p + ".attention.key", layer.attention.key);
    linear(p + ".attention.value", layer.attention.value);
    linear(p + ".attention.output", layer.attention.output);
    ff(p + ".ff_second", layer.ff_second);
    norm(p + ".final_norm", layer.final_norm);
  }
  linear("output_head", w.output_head);
}

// Shapes per config; all linear weights and biases zero, norms identity.
template <typename Scalar>
ConformerWeights<Scalar> make_weights(const ConformerConfig& c) {
  c.validate();
  const int d = c.model_dim;
  ConformerWeights<Scalar> w;
  w.config = c;
  w.input_proj = Linear<Scalar>(c.input_dim, d);
  w.output_head = Linear<Scalar>(d, c.output_dim);
  w.layers.resize(c.num_layers);
  for (auto& layer : w.layers) {
    for (auto* f : {&layer.ff_first, &layer.ff_second}) {
      f->norm = NormWeights<Scalar>(d);
      f->expand = Linear<Scalar>(d, c.ff_dim);
      f->project = Linear<Scalar>(c.ff_dim, d);
    }
    layer.conv.norm = NormWeights<Scalar>(d);
    layer.conv.pointwise_in = Linear<Scalar>(d, 2 * d);
    layer.conv.depthwise = Matrix<Scalar>::Zero(d, c.conv_kernel);
    layer.conv.depthwise_bias = Vector<Scalar>::Zero(d);
    layer.conv.group_norm = NormWeights<Scalar>(d);
    layer.conv.pointwise_out = Linear<Scalar>(d, d);
    layer.attention.norm = NormWeights<Scalar>(d);
    for (auto* lin : {&layer.attention.query, &layer.attention.key, &layer.attention.value,
                      &layer.attention.output}) {
      *lin = Linear<Scalar>(d, d);
    }
    layer.final_norm = NormWeights<Scalar>(d);
  }
  return w;
}

// Weight matrices ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) drawn from SplitMix64
// in declared tensor order; biases 0, norm scales 1.
template <typename Scalar>
ConformerWeights<Scalar> init_weights(const ConformerConfig& c, std::uint64_t seed) {
  ConformerWeights<Scalar> w = make_weights<Scalar>(c);
  SplitMix64 rng(seed);
  for_each_tensor(w, [&](const std::string&, auto& t, TensorRole role) {
    if (role != TensorRole::kWeight) return;
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.cols()));
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index col = 0; col < t.cols(); ++col) {
        t(r, col) = Scalar(rng.uniform(-bound, bound));
      }
    }
  });
  return w;
}

namespace nn {

template <typename Scalar>
Matrix<Scalar> linear(const Matrix<Scalar>& x, const Linear<Scalar>& lin) {
  Matrix<Scalar> y = x * lin.weight.transpose();
  y.rowwise() += lin.bias.transpose();
  return y;
}

template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const NormWeights<Scalar>& n) {
  constexpr Scalar kEps = Scalar(1e-5);
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const Scalar mean = x.row(t).mean();
    const Scalar var = (x.row(t).array() - mean).square().mean();
    const Scalar inv = Scalar(1) / std::sqrt(var + kEps);
    y.row(t) = ((x.row(t).array() - mean) * inv * n.gamma.transpose().array() +
                n.beta.transpose().array())
                   .matrix();
  }
  return y;
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-x))
                        : std::exp(x) / (Scalar(1) + std::exp(x));
}

template <typename Scalar>
Matrix<Scalar> swish(const Matrix<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return v * sigmoid(v); });
}

template <typename Scalar>
Matrix<Scalar> feed_forward(const Matrix<Scalar>& x, const FeedForwardWeights<Scalar>& w) {
  return linear(swish(linear(layer_norm(x, w.norm), w.expand)), w.project);
}

template <typename Scalar>
Matrix<Scalar> glu(const Matrix<Scalar>& x) {
  const Eigen::Index d = x.cols() / 2;
  return x.leftCols(d).cwiseProduct(x.rightCols(d).unaryExpr([](Scalar v) { return sigmoid(v); }));
}

// One output frame of the depthwise convolution. `window` holds the last
// `kernel` GLU frames, oldest first, zero rows before the sequence start.
template <typename Scalar>
RowVector<Scalar> depthwise_frame(const Matrix<Scalar>& window, const ConvModuleWeights<Scalar>& w) {
  RowVector<Scalar> acc = w.depthwise_bias.transpose();
  for (Eigen::Index j = 0; j < w.depthwise.cols(); ++j) {
    acc += window.row(j).cwiseProduct(w.depthwise.col(j).transpose());
  }
  return acc;
}

template <typename Scalar>
Matrix<Scalar> conv_tail(const Matrix<Scalar>& depthwise_out, const ConvModuleWeights<Scalar>& w) {
  return linear(swish(layer_norm(depthwise_out, w.group_norm)), w.pointwise_out);
}

// Multi-head attention of one query row over `keys`/`values` (oldest first,
// the current frame last).
template <typename Scalar>
RowVector<Scalar> attend(const RowVector<Scalar>& query, const Matrix<Scalar>& keys,
                         const Matrix<Scalar>& values, int num_heads) {
  const Eigen::Index dim = query.size();
  const Eigen::Index head = dim / num_heads;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(head));
  RowVector<Scalar> out(dim);
  Vector<Scalar> scores(keys.rows());
  for (int h = 0; h < num_heads; ++h) {
    scores.noalias() = keys.middleCols(h * head, head) * query.segment(h * head, head).transpose();
    scores *= scale;
    scores = (scores.array() - scores.maxCoeff()).exp().matrix();
    scores /= scores.sum();
    out.segment(h * head, head).noalias() = scores.transpose() * values.middleCols(h * head, head);
  }
  return out;
}

template <typename Scalar>
Scalar bounded_sigmoid(Scalar x) {
  return std::clamp(sigmoid(x), std::numeric_limits<Scalar>::min(),
                    Scalar(1) - std::numeric_limits<Scalar>::epsilon() / Scalar(2));
}

}  // namespace nn

// Batch forward over a whole sequence of stacked frames (one per row).
// Frame t only ever sees frames <= t.
template <typename Scalar>
Mask<Scalar> forward(const Matrix<Scalar>& features, const ConformerWeights<Scalar>& w) {
  const ConformerConfig& c = w.config;
  if (features.cols() != c.input_dim) {
    throw Error(Errc::kShapeMismatch, "feature dim " + std::to_string(features.cols()) +
                                          " != input_dim " + std::to_string(c.input_dim));
  }
  if (!features.allFinite()) throw Error(Errc::kNonFinite, "non-finite input features");
  const Eigen::Index frames = features.rows();
  const int d = c.model_dim;
  const int kernel = c.conv_kernel;

  Matrix<Scalar> h = nn::linear(features, w.input_proj);
  for (const auto& layer : w.layers) {
    h += Scalar(0.5) * nn::feed_forward(h, layer.ff_first);

    const Matrix<Scalar> gated =
        nn::glu(nn::linear(nn::layer_norm(h, layer.conv.norm), layer.conv.pointwise_in));
    Matrix<Scalar> dw(frames, d);
    Matrix<Scalar> window(kernel, d);
    for (Eigen::Index t = 0; t < frames; ++t) {
      for (int j = 0; j < kernel; ++j) {
        const Eigen::Index src = t - (kernel - 1) + j;
        if (src >= 0) {
          window.row(j) = gated.row(src);
        } else {
          window.row(j).setZero();
        }
      }
      dw.row(t) = nn::depthwise_frame(window, layer.conv);
    }
    h += nn::conv_tail(dw, layer.conv);

    const Matrix<Scalar> normed = nn::layer_norm(h, layer.attention.norm);
    const Matrix<Scalar> q = nn::linear(normed, layer.attention.query);
    const Matrix<Scalar> k = nn::linear(normed, layer.attention.key);
    const Matrix<Scalar> v = nn::linear(normed, layer.attention.value);
    Matrix<Scalar> ctx(frames, d);
    for (Eigen::Index t = 0; t < frames; ++t) {
      const Eigen::Index first = std::max<Eigen::Index>(0, t - c.attn_past_frames);
      const Eigen::Index n = t - first + 1;
      ctx.row(t) = nn::attend<Scalar>(q.row(t), k.middleRows(first, n), v.middleRows(first, n),
                                      c.num_heads);
    }
    h += nn::linear(ctx, layer.attention.output);

    h += Scalar(0.5) * nn::feed_forward(h, layer.ff_second);
    h = nn::layer_norm(h, layer.final_norm);
  }
  Matrix<Scalar> logits = nn::linear(h, w.output_head);
  return Mask<Scalar>(logits.unaryExpr([](Scalar x) { return nn::bounded_sigmoid(x); }));
}

template <typename Scalar>
Mask<Scalar> forward(const StackedFeatures<Scalar>& features, const ConformerWeights<Scalar>& w) {
  return forward(features.values, w);
}

// Fixed-capacity history of frames, oldest dropped first.
template <typename Scalar>
class FrameRing {
 public:
  FrameRing() = default;
  FrameRing(int capacity, int dim) : buffer_(Matrix<Scalar>::Zero(capacity, dim)) {}

  int capacity() const { return static_cast<int>(buffer_.rows()); }
  int size() const { return size_; }

  void push(const RowVector<Scalar>& row) {
    if (capacity() == 0) return;
    buffer_.row(head_) = row;
    head_ = (head_ + 1) % capacity();
    size_ = std::min(size_ + 1, capacity());
  }

  // Stored frames oldest first, then `current` appended when given.
  Matrix<Scalar> window(const RowVector<Scalar>* current = nullptr) const {
    const int extra = current ? 1 : 0;
    Matrix<Scalar> out(size_ + extra, buffer_.cols());
    const int start = (head_ - size_ + capacity()) % std::max(1, capacity());
    for (int i = 0; i < size_; ++i) out.row(i) = buffer_.row((start + i) % capacity());
    if (current) out.row(size_) = *current;
    return out;
  }

  void clear() {
    head_ = 0;
    size_ = 0;
  }

 private:
  Matrix<Scalar> buffer_;
  int head_ = 0;
  int size_ = 0;
};

// Per-layer streaming context: the last kernel-1 GLU frames for the causal
// convolution and the key/value projections of the last attn_past_frames
// frames for attention.
template <typename Scalar>
class StreamState {
 public:
  struct LayerState {
    FrameRing<Scalar> conv;
    FrameRing<Scalar> keys;
    FrameRing<Scalar> values;
  };

  explicit StreamState(const ConformerConfig& c) {
    c.validate();
    layers_.resize(c.num_layers);
    for (auto& l : layers_) {
      l.conv = FrameRing<Scalar>(c.conv_kernel - 1, c.model_dim);
      l.keys = FrameRing<Scalar>(c.attn_past_frames, c.model_dim);
      l.values = FrameRing<Scalar>(c.attn_past_frames, c.model_dim);
    }
  }

  void reset() {
    for (auto& l : layers_) {
      l.conv.clear();
      l.keys.clear();
      l.values.clear();
    }
  }

  std::vector<LayerState>& layers() { return layers_; }
  const std::vector<LayerState>& layers() const { return layers_; }

 private:
  std::vector<LayerState> layers_;
};

// Processes one stacked frame; matches the corresponding row of forward().
template <typename Scalar>
RowVector<Scalar> forward_streaming(StreamState<Scalar>& state, const RowVector<Scalar>& frame,
                                    const ConformerWeights<Scalar>& w) {
  const ConformerConfig& c = w.config;
  if (frame.size() != c.input_dim) throw Error(Errc::kShapeMismatch, "frame dim != input_dim");
  if (static_cast<int>(state.layers().size()) != c.num_layers) {
    throw Error(Errc::kConfigMismatch, "stream state built for a different config");
  }
  const int kernel = c.conv_kernel;
  Matrix<Scalar> h = nn::linear(Matrix<Scalar>(frame), w.input_proj);
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    const auto& layer = w.layers[i];
    auto& ls = state.layers()[i];
    h += Scalar(0.5) * nn::feed_forward(h, layer.ff_first);

    const RowVector<Scalar> gated =
        nn::glu(nn::linear(nn::layer_norm(h, layer.conv.norm), layer.conv.pointwise_in));
    const Matrix<Scalar> history = ls.conv.window(&gated);
    Matrix<Scalar> window = Matrix<Scalar>::Zero(kernel, c.model_dim);
    window.bottomRows(history.rows()) = history;
    ls.conv.push(gated);
    h += nn::conv_tail(Matrix<Scalar>(nn::depthwise_frame(window, layer.conv)), layer.conv);

    const Matrix<Scalar> normed = nn::layer_norm(h, layer.attention.norm);
    const RowVector<Scalar> q = nn::linear(normed, layer.attention.query);
    const RowVector<Scalar> k = nn::linear(normed, layer.attention.key);
    const RowVector<Scalar> v = nn::linear(normed, layer.attention.value);
    const Matrix<Scalar> ctx =
        nn::attend<Scalar>(q, ls.keys.window(&k), ls.values.window(&v), c.num_heads);
    ls.keys.push(k);
    ls.values.push(v);
    h += nn::linear(ctx, layer.attention.output);

    h += Scalar(0.5) * nn::feed_forward(h, layer.ff_second);
    h = nn::layer_norm(h, layer.final_norm);
  }
  const Matrix<Scalar> logits = nn::linear(h, w.output_head);
  return logits.unaryExpr([](Scalar x) { return nn::bounded_sigmoid(x); });
}

// Weight container: "CSCF", u32 version, eight u32 config fields, u64 value
// count, then every tensor of for_each_tensor() as little-endian float32,
// matrices row-major.
template <typename Scalar>
void save_weights(const ConformerWeights<Scalar>& w, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIo, "cannot open " + path + " for writing");
  const ConformerConfig& c = w.config;
  out.write("CSCF", 4);
  binary::put_u32(out, 1);
  for (int v : {c.num_layers, c.model_dim, c.ff_dim, c.conv_kernel, c.num_heads,
                c.attn_past_frames, c.input_dim, c.output_dim}) {
    binary::put_u32(out, static_cast<std::uint32_t>(v));
  }
  binary::put_u64(out, static_cast<std::uint64_t>(count_params(c)));
  for_each_tensor(w, [&](const std::string&, const auto& t, TensorRole) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index col = 0; col < t.cols(); ++col) {
        binary::put_f32(out, static_cast<float>(t(r, col)));
      }
    }
  });
  if (!out) throw Error(Errc::kIo, "failed writing " + path);
}

inline ConformerConfig read_conformer_header(std::istream& in) {
  binary::expect_magic(in, "CSCF");
  const std::uint32_t version = binary::get_u32(in);
  if (version != 1) {
    throw Error(Errc::kUnsupportedVersion, "unsupported weight container version " +
                                               std::to_string(version));
  }
  ConformerConfig c;
  for (int* v : {&c.num_layers, &c.model_dim, &c.ff_dim, &c.conv_kernel, &c.num_heads,
                 &c.attn_past_frames, &c.input_dim, &c.output_dim}) {
    *v = static_cast<int>(binary::get_u32(in));
  }
  return c;
}

template <typename Scalar>
ConformerWeights<Scalar> load_weights(const std::string& path, const ConformerConfig& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path);
  const ConformerConfig c = read_conformer_header(in);
  if (!(c == expected)) throw Error(Errc::kConfigMismatch, "config mismatch in " + path);
  if (binary::get_u64(in) != static_cast<std::uint64_t>(count_params(c))) {
    throw Error(Errc::kConfigMismatch, "config mismatch: parameter count in " + path);
  }
  ConformerWeights<Scalar> w = make_weights<Scalar>(c);
  for_each_tensor(w, [&](const std::string&, auto& t, TensorRole) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index col = 0; col < t.cols(); ++col) t(r, col) = Scalar(binary::get_f32(in));
    }
  });
  return w;
}

template <typename Scalar>
ConformerWeights<Scalar> load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path);
  const ConformerConfig c = read_conformer_header(in);
  c.validate();
  in.close();
  return load_weights<Scalar>(path, c);
}

}  // namespace cleanstream

#endif  // CLEANSTREAM_CONFORMER_HPP_
