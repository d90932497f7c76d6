#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rebox/errors.hpp"
#include "rebox/geometry.hpp"
#include "rebox/io.hpp"
#include "rebox/ops.hpp"
#include "rebox/rng.hpp"
#include "rebox/tensor.hpp"

namespace rebox {

/// Architecture description. `scale` multiplies every channel count and fc
/// width, so the full-size network (side 128, scale 1) and the desk-scale one
/// (side 64, scale 0.25) share one topology. Recycling forwards the outputs of
/// `recycle_taps` (three pool outputs plus the top conv block by default) into
/// the first fc layer alongside nothing else; without recycling only the top
/// conv output feeds it.
struct NetworkSpec {
  int input_side = 64;
  int input_channels = 3;
  double scale = 0.25;
  bool recycle = false;
  std::vector<int> recycle_taps;  // {5, 10, 15, 19} when recycling is enabled
  double forwarded_dropout_p = 0.0;  // "d" variant: dropout on forwarded features
  int reduce_forwarded = 0;          // "r" variant: 1x1 reduction width per tap, 0 = off
  int cross_channel_layers = 1;      // "2" variant: duplicate every 1x1 conv
  bool use_size_input = true;
  double fc_dropout_p = 0.5;
  std::uint64_t seed = 1;

  void validate() const {
    if (input_side < 8) throw ConfigError("input_side must be at least 8");
    if (input_channels < 1) throw ConfigError("input_channels must be positive");
    if (scale <= 0) throw ConfigError("scale must be positive");
    if (recycle == recycle_taps.empty())
      throw ConfigError("recycle_taps must be non-empty exactly when recycle is on");
    for (int t : recycle_taps)
      if (t < 1 || t > 19) throw ConfigError("recycle tap out of range [1,19]");
    if (forwarded_dropout_p < 0 || forwarded_dropout_p >= 1)
      throw ConfigError("forwarded_dropout_p must be in [0,1)");
    if (fc_dropout_p < 0 || fc_dropout_p >= 1)
      throw ConfigError("fc_dropout_p must be in [0,1)");
    if (reduce_forwarded < 0) throw ConfigError("reduce_forwarded must be >= 0");
    if (cross_channel_layers != 1 && cross_channel_layers != 2)
      throw ConfigError("cross_channel_layers must be 1 or 2");
  }
};

/// Named variants: "basis", "wrdf", plus suffix letters on wrdf
/// ("wrdf_d", "wrdf_r", "wrdf_2", combinable as e.g. "wrdf_dr").
inline void apply_variant(NetworkSpec& spec, const std::string& name) {
  spec.recycle = false;
  spec.recycle_taps.clear();
  spec.forwarded_dropout_p = 0;
  spec.reduce_forwarded = 0;
  spec.cross_channel_layers = 1;
  if (name == "basis") return;
  if (name.rfind("wrdf", 0) != 0) throw ConfigError("unknown variant: " + name);
  spec.recycle = true;
  spec.recycle_taps = {5, 10, 15, 19};
  std::string mods = name.substr(4);
  if (!mods.empty() && mods[0] == '_') mods = mods.substr(1);
  for (char m : mods) {
    switch (m) {
      case 'd': spec.forwarded_dropout_p = 0.25; break;
      case 'r': spec.reduce_forwarded = 16; break;
      case '2': spec.cross_channel_layers = 2; break;
      default: throw ConfigError("unknown variant modifier in: " + name);
    }
  }
}

inline std::string spec_to_kv(const NetworkSpec& s) {
  std::ostringstream o;
  o << "input_side=" << s.input_side << "\n";
  o << "input_channels=" << s.input_channels << "\n";
  o << "scale=" << std::hexfloat << s.scale << std::defaultfloat << "\n";
  o << "recycle=" << (s.recycle ? 1 : 0) << "\n";
  o << "recycle_taps=";
  for (std::size_t i = 0; i < s.recycle_taps.size(); ++i)
    o << (i ? "," : "") << s.recycle_taps[i];
  o << "\n";
  o << "forwarded_dropout_p=" << std::hexfloat << s.forwarded_dropout_p << std::defaultfloat
    << "\n";
  o << "reduce_forwarded=" << s.reduce_forwarded << "\n";
  o << "cross_channel_layers=" << s.cross_channel_layers << "\n";
  o << "use_size_input=" << (s.use_size_input ? 1 : 0) << "\n";
  o << "fc_dropout_p=" << std::hexfloat << s.fc_dropout_p << std::defaultfloat << "\n";
  o << "seed=" << s.seed << "\n";
  return o.str();
}

inline NetworkSpec spec_from_kv(const std::string& text) {
  NetworkSpec s;
  s.recycle_taps.clear();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(FormatError::Kind::Malformed, "bad spec line: " + line);
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    try {
      if (key == "input_side") s.input_side = std::stoi(val);
      else if (key == "input_channels") s.input_channels = std::stoi(val);
      else if (key == "scale") s.scale = std::strtod(val.c_str(), nullptr);
      else if (key == "recycle") s.recycle = std::stoi(val) != 0;
      else if (key == "recycle_taps") {
        std::istringstream ts(val);
        std::string tok;
        while (std::getline(ts, tok, ','))
          if (!tok.empty()) s.recycle_taps.push_back(std::stoi(tok));
      } else if (key == "forwarded_dropout_p") s.forwarded_dropout_p = std::strtod(val.c_str(), nullptr);
      else if (key == "reduce_forwarded") s.reduce_forwarded = std::stoi(val);
      else if (key == "cross_channel_layers") s.cross_channel_layers = std::stoi(val);
      else if (key == "use_size_input") s.use_size_input = std::stoi(val) != 0;
      else if (key == "fc_dropout_p") s.fc_dropout_p = std::strtod(val.c_str(), nullptr);
      else if (key == "seed") s.seed = std::stoull(val);
      else throw FormatError(FormatError::Kind::Malformed, "unknown spec key: " + key);
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError(FormatError::Kind::Malformed, "bad spec value for " + key);
    }
  }
  return s;
}

/// One mini-batch of regression work: warped patches, the pre-warp box sizes
/// (consumed only when the network takes the size side input), and targets.
template <typename T>
struct RegressionBatchT {
  TensorT<T> inputs;                           // (L, side, side, channels)
  std::vector<std::array<double, 2>> sizes;    // per-sample pre-warp (w, h)
  TensorT<T> targets;                          // (L, 4): nx1, ny1, nx2, ny2
};
using RegressionBatch = RegressionBatchT<float>;

template <typename T>
struct LossT {
  double value = 0;
  TensorT<T> grad;  // dF/dpredictions, same shape as predictions
};

/// F = (1/(4L)) sum over samples of squared target-prediction distance;
/// gradient (prediction - target)/(2L).
template <typename T>
LossT<T> mse_loss(const TensorT<T>& preds, const TensorT<T>& targets) {
  if (!preds.same_shape(targets) || preds.rank() != 2 || preds.extent(1) != 4)
    throw ShapeError("loss expects matching (L, 4) tensors");
  const int l = preds.extent(0);
  LossT<T> r;
  r.grad = TensorT<T>(preds.shape());
  double acc = 0;
  for (std::size_t i = 0; i < preds.numel(); ++i) {
    const double d = double(preds[i]) - double(targets[i]);
    acc += d * d;
    r.grad[i] = T(d / (2.0 * l));
  }
  r.value = acc / (4.0 * l);
  return r;
}

template <typename T>
class NetworkT {
 public:
  explicit NetworkT(NetworkSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    build();
    init_params();
  }

  const NetworkSpec& spec() const { return spec_; }
  int fc_input_width() const { return fc_input_width_; }

  std::vector<TensorT<T>>& params() { return params_; }
  const std::vector<TensorT<T>>& params() const { return params_; }
  std::vector<TensorT<T>>& grads() { return grads_; }
  const std::vector<std::string>& param_names() const { return names_; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
  }

  void zero_grads() {
    for (auto& g : grads_) g.fill(T(0));
  }

  /// Returns the raw (L, 4) linear outputs. `rng` drives the dropout masks and
  /// is required in train mode when any dropout probability is positive; mask
  /// draw order is taps in ascending layer order, then fc 20, then fc 21.
  TensorT<T> forward(const TensorT<T>& inputs,
                     const std::vector<std::array<double, 2>>* sizes, bool train, Rng* rng) {
    if (inputs.rank() != 4 || inputs.extent(1) != spec_.input_side ||
        inputs.extent(2) != spec_.input_side || inputs.extent(3) != spec_.input_channels)
      throw ShapeError("batch does not match the network input shape");
    if (spec_.use_size_input && (!sizes || int(sizes->size()) != inputs.extent(0)))
      throw ShapeError("size side input missing or wrong length");
    const bool needs_rng =
        train && (spec_.fc_dropout_p > 0 || (spec_.recycle && spec_.forwarded_dropout_p > 0));
    if (needs_rng && !rng) throw Error("train-mode forward needs an rng for dropout");
    train_ = train;

    acts_.assign(stack_.size() + 1, {});
    zcache_.assign(stack_.size(), {});
    argmax_.assign(stack_.size(), {});
    acts_[0] = inputs;
    for (std::size_t i = 0; i < stack_.size(); ++i) {
      const auto& l = stack_[i];
      if (l.kind == StackLayer::Kind::conv) {
        zcache_[i] =
            conv2d_forward(acts_[i], params_[l.w], params_[l.b], l.stride, Padding::same);
        acts_[i + 1] = relu_forward(zcache_[i]);
      } else {
        auto r = maxpool_forward(acts_[i], 3, 2);
        acts_[i + 1] = std::move(r.out);
        argmax_[i] = std::move(r.argmax);
      }
    }

    taps_fwd_.clear();
    std::vector<const TensorT<T>*> parts;
    for (const auto& tap : taps_) {
      TapForward f;
      const TensorT<T>* cur = &acts_[tap.act_pos];
      if (tap.dropout_p > 0 && train_) {
        auto d = dropout_forward(*cur, tap.dropout_p, true, *rng);
        f.dropped = std::move(d.out);
        f.mask = std::move(d.mask);
        cur = &f.dropped;
      }
      if (tap.reduce_w >= 0) {
        f.reduce_in = *cur;
        f.reduce_z = conv2d_forward(f.reduce_in, params_[tap.reduce_w], params_[tap.reduce_b],
                                    1, Padding::same);
        f.flat = flatten(relu_forward(f.reduce_z));
      } else {
        f.flat = flatten(*cur);
      }
      taps_fwd_.push_back(std::move(f));
    }
    for (const auto& f : taps_fwd_) parts.push_back(&f.flat);

    TensorT<T> size_cols;
    if (spec_.use_size_input) {
      size_cols = TensorT<T>({inputs.extent(0), 2});
      const double denom = std::log(1.0 + spec_.input_side * 8.0);
      for (int i = 0; i < inputs.extent(0); ++i) {
        size_cols.at2(i, 0) = T(std::log(1.0 + (*sizes)[std::size_t(i)][0]) / denom);
        size_cols.at2(i, 1) = T(std::log(1.0 + (*sizes)[std::size_t(i)][1]) / denom);
      }
      parts.push_back(&size_cols);
    }

    h0_ = concat_forward(parts);
    part_shapes_.clear();
    for (const auto* p : parts) part_shapes_.push_back(p->shape());

    z20_ = fc_forward(h0_, params_[fc20_w_], params_[fc20_b_]);
    TensorT<T> a20 = relu_forward(z20_);
    if (train_ && spec_.fc_dropout_p > 0) {
      auto d = dropout_forward(a20, spec_.fc_dropout_p, true, *rng);
      h1_ = std::move(d.out);
      mask20_ = std::move(d.mask);
    } else {
      h1_ = std::move(a20);
      mask20_.clear();
    }
    z21_ = fc_forward(h1_, params_[fc21_w_], params_[fc21_b_]);
    if (train_ && spec_.fc_dropout_p > 0) {
      auto d = dropout_forward(z21_, spec_.fc_dropout_p, true, *rng);
      h2_ = std::move(d.out);
      mask21_ = std::move(d.mask);
    } else {
      h2_ = z21_;
      mask21_.clear();
    }
    TensorT<T> out = fc_forward(h2_, params_[fc22_w_], params_[fc22_b_]);
#ifndef NDEBUG
    assert(out.all_finite());
#endif
    return out;
  }

  /// Accumulates parameter gradients for the most recent forward pass.
  void backward(const TensorT<T>& grad_out) {
    auto g22 = fc_backward(h2_, params_[fc22_w_], grad_out);
    grads_[fc22_w_] += g22.weights;
    grads_[fc22_b_] += g22.bias;
    TensorT<T> g = std::move(g22.input);
    if (!mask21_.empty()) g = dropout_backward(mask21_, spec_.fc_dropout_p, g);
    auto g21 = fc_backward(h1_, params_[fc21_w_], g);
    grads_[fc21_w_] += g21.weights;
    grads_[fc21_b_] += g21.bias;
    g = std::move(g21.input);
    if (!mask20_.empty()) g = dropout_backward(mask20_, spec_.fc_dropout_p, g);
    g = relu_backward(z20_, g);
    auto g20 = fc_backward(h0_, params_[fc20_w_], g);
    grads_[fc20_w_] += g20.weights;
    grads_[fc20_b_] += g20.bias;

    auto part_grads = concat_backward(g20.input, part_shapes_);
    std::map<int, TensorT<T>> tap_grad;
    for (std::size_t k = 0; k < taps_.size(); ++k) {
      const auto& tap = taps_[k];
      auto& f = taps_fwd_[k];
      TensorT<T> tg = part_grads[k].reshaped(tap.reduce_w >= 0
                                                 ? f.reduce_z.shape()
                                                 : acts_[tap.act_pos].shape());
      if (tap.reduce_w >= 0) {
        tg = relu_backward(f.reduce_z, tg);
        auto cg = conv2d_backward(f.reduce_in, params_[tap.reduce_w], tg, 1, Padding::same);
        grads_[tap.reduce_w] += cg.weights;
        grads_[tap.reduce_b] += cg.bias;
        tg = std::move(cg.input);
      }
      if (!f.mask.empty()) tg = dropout_backward(f.mask, tap.dropout_p, tg);
      auto [it, fresh] = tap_grad.try_emplace(tap.act_pos, std::move(tg));
      if (!fresh) it->second += tg;
    }

    TensorT<T> gs(acts_.back().shape());
    if (auto it = tap_grad.find(int(stack_.size())); it != tap_grad.end()) gs += it->second;
    for (int i = int(stack_.size()) - 1; i >= 0; --i) {
      const auto& l = stack_[std::size_t(i)];
      if (l.kind == StackLayer::Kind::conv) {
        TensorT<T> gz = relu_backward(zcache_[std::size_t(i)], gs);
        auto cg = conv2d_backward(acts_[std::size_t(i)], params_[l.w], gz, l.stride,
                                  Padding::same);
        grads_[l.w] += cg.weights;
        grads_[l.b] += cg.bias;
        gs = std::move(cg.input);
      } else {
        gs = maxpool_backward(argmax_[std::size_t(i)], acts_[std::size_t(i)].shape(), gs);
      }
      if (auto it = tap_grad.find(i); it != tap_grad.end()) gs += it->second;
    }
#ifndef NDEBUG
    for (const auto& gr : grads_) assert(gr.all_finite());
#endif
  }

  void save(const std::string& path) const {
    atomic_write(path, [&](const std::string& tmp) {
      BinWriter w(tmp);
      w.str("RDF1");
      w.u32(1);
      const std::string kv = spec_to_kv(spec_);
      w.u32(std::uint32_t(kv.size()));
      w.str(kv);
      for (std::size_t i = 0; i < params_.size(); ++i) {
        w.u32(std::uint32_t(names_[i].size()));
        w.str(names_[i]);
        w.u32(std::uint32_t(params_[i].rank()));
        for (int a = 0; a < params_[i].rank(); ++a) w.u32(std::uint32_t(params_[i].extent(a)));
        for (std::size_t j = 0; j < params_[i].numel(); ++j) w.f32(float(params_[i][j]));
      }
      w.finish_with_crc();
      w.close();
    });
  }

  static NetworkT load(const std::string& path) {
    BinReader r(path);
    if (r.str(4) != "RDF1")
      throw FormatError(FormatError::Kind::BadMagic, "not a checkpoint file: " + path);
    if (r.u32() != 1)
      throw FormatError(FormatError::Kind::BadVersion, "unsupported checkpoint version");
    NetworkSpec spec = spec_from_kv(r.str(r.u32()));
    NetworkT net(spec);
    for (std::size_t i = 0; i < net.params_.size(); ++i) {
      const std::string name = r.str(r.u32());
      if (name != net.names_[i])
        throw FormatError(FormatError::Kind::Malformed,
                          "unexpected tensor " + name + ", wanted " + net.names_[i]);
      const std::uint32_t rank = r.u32();
      if (rank != std::uint32_t(net.params_[i].rank()))
        throw FormatError(FormatError::Kind::Malformed, "tensor rank mismatch for " + name);
      for (std::uint32_t a = 0; a < rank; ++a)
        if (r.u32() != std::uint32_t(net.params_[i].extent(int(a))))
          throw FormatError(FormatError::Kind::Malformed, "tensor extent mismatch for " + name);
      for (std::size_t j = 0; j < net.params_[i].numel(); ++j) net.params_[i][j] = T(r.f32());
    }
    r.expect_crc();
    return net;
  }

 private:
  struct StackLayer {
    enum class Kind { conv, pool };
    Kind kind = Kind::conv;
    int table_id = 0;
    int kernel = 3, stride = 1;
    int w = -1, b = -1;
  };

  struct Tap {
    int table_id = 0;
    int act_pos = 0;  // index into acts_
    double dropout_p = 0;
    int reduce_w = -1, reduce_b = -1;
  };

  struct TapForward {
    TensorT<T> dropped;
    std::vector<std::uint8_t> mask;
    TensorT<T> reduce_in, reduce_z;
    TensorT<T> flat;
  };

  int scaled(int base) const { return std::max(1, int(std::lround(base * spec_.scale))); }

  int add_param(const std::string& name, std::vector<int> shape) {
    names_.push_back(name);
    params_.emplace_back(shape);
    grads_.emplace_back(std::move(shape));
    return int(params_.size()) - 1;
  }

  void add_conv_row(int table_id, int kernel, int stride, int out_c, int& cur_c, int& side) {
    const int copies = (kernel == 1 && spec_.cross_channel_layers == 2) ? 2 : 1;
    for (int dup = 0; dup < copies; ++dup) {
      StackLayer l;
      l.kind = StackLayer::Kind::conv;
      l.table_id = table_id;
      l.kernel = kernel;
      l.stride = dup == 0 ? stride : 1;
      std::ostringstream name;
      name << "conv" << (table_id < 10 ? "0" : "") << table_id;
      if (copies == 2) name << char('a' + dup);
      l.w = add_param(name.str() + ".w", {kernel, kernel, cur_c, out_c});
      l.b = add_param(name.str() + ".b", {out_c});
      stack_.push_back(l);
      cur_c = out_c;
      if (l.stride == 2) side = (side + 1) / 2;
    }
  }

  void build() {
    int side = spec_.input_side, cur_c = spec_.input_channels;
    std::map<int, std::pair<int, int>> row_out;  // table_id -> (act_pos, flat width)
    auto note = [&](int id) { row_out[id] = {int(stack_.size()), side * side * cur_c}; };

    struct Row { int id, kernel, stride, base_c; };
    const Row conv_rows[] = {{1, 3, 1, 32},  {2, 1, 1, 32},  {3, 3, 2, 32},  {4, 1, 1, 32},
                             {6, 3, 1, 64},  {7, 1, 1, 64},  {8, 3, 1, 64},  {9, 1, 1, 64},
                             {11, 3, 1, 128}, {12, 1, 1, 128}, {13, 3, 1, 192}, {14, 1, 1, 192},
                             {16, 3, 1, 256}, {17, 1, 1, 256}, {18, 3, 1, 384}, {19, 1, 1, 384}};
    std::size_t next = 0;
    for (int id = 1; id <= 19; ++id) {
      if (id == 5 || id == 10 || id == 15) {
        StackLayer l;
        l.kind = StackLayer::Kind::pool;
        l.table_id = id;
        l.kernel = 3;
        l.stride = 2;
        stack_.push_back(l);
        side = (side + 1) / 2;
      } else {
        const Row& row = conv_rows[next++];
        add_conv_row(row.id, row.kernel, row.stride, scaled(row.base_c), cur_c, side);
      }
      note(id);
    }

    std::vector<int> tap_ids = spec_.recycle ? spec_.recycle_taps : std::vector<int>{19};
    std::sort(tap_ids.begin(), tap_ids.end());
    tap_ids.erase(std::unique(tap_ids.begin(), tap_ids.end()), tap_ids.end());
    int fc_in = 0;
    for (int id : tap_ids) {
      auto it = row_out.find(id);
      if (it == row_out.end()) throw ConfigError("recycle tap has no layer output");
      Tap tap;
      tap.table_id = id;
      tap.act_pos = it->second.first;
      tap.dropout_p = spec_.recycle ? spec_.forwarded_dropout_p : 0;
      taps_.push_back(tap);
      fc_in += it->second.second;
    }
    // Reduction convs need channel counts; recover them from the layer table.
    if (spec_.recycle && spec_.reduce_forwarded > 0) {
      fc_in = 0;
      for (auto& tap : taps_) {
        int tap_side = spec_.input_side, tap_c = spec_.input_channels;
        {
          int s = spec_.input_side, c = spec_.input_channels;
          for (std::size_t i = 0; i < std::size_t(tap.act_pos); ++i) {
            const auto& l = stack_[i];
            if (l.kind == StackLayer::Kind::conv) c = params_[l.w].extent(3);
            if (l.stride == 2) s = (s + 1) / 2;
          }
          tap_side = s;
          tap_c = c;
        }
        std::ostringstream name;
        name << "reduce" << (tap.table_id < 10 ? "0" : "") << tap.table_id;
        tap.reduce_w = add_param(name.str() + ".w", {1, 1, tap_c, spec_.reduce_forwarded});
        tap.reduce_b = add_param(name.str() + ".b", {spec_.reduce_forwarded});
        fc_in += tap_side * tap_side * spec_.reduce_forwarded;
      }
    }
    if (spec_.use_size_input) fc_in += 2;
    fc_input_width_ = fc_in;

    const int fc_w = scaled(1024);
    fc20_w_ = add_param("fc20.w", {fc_in, fc_w});
    fc20_b_ = add_param("fc20.b", {fc_w});
    fc21_w_ = add_param("fc21.w", {fc_w, fc_w});
    fc21_b_ = add_param("fc21.b", {fc_w});
    fc22_w_ = add_param("fc22.w", {fc_w, 4});
    fc22_b_ = add_param("fc22.b", {4});
  }

  void init_params() {
    Rng rng = derive_stream(spec_.seed, "network.init");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (p.rank() == 1) continue;  // biases stay zero
      double fan_in, fan_out;
      if (p.rank() == 4) {
        fan_in = double(p.extent(0)) * p.extent(1) * p.extent(2);
        fan_out = double(p.extent(0)) * p.extent(1) * p.extent(3);
      } else {
        fan_in = p.extent(0);
        fan_out = p.extent(1);
      }
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (std::size_t j = 0; j < p.numel(); ++j) p[j] = T(rng.uniform(-limit, limit));
    }
  }

  NetworkSpec spec_;
  std::vector<StackLayer> stack_;
  std::vector<Tap> taps_;
  std::vector<TensorT<T>> params_, grads_;
  std::vector<std::string> names_;
  int fc20_w_ = -1, fc20_b_ = -1, fc21_w_ = -1, fc21_b_ = -1, fc22_w_ = -1, fc22_b_ = -1;
  int fc_input_width_ = 0;
  bool train_ = false;

  // forward caches
  std::vector<TensorT<T>> acts_, zcache_;
  std::vector<std::vector<std::int32_t>> argmax_;
  std::vector<TapForward> taps_fwd_;
  TensorT<T> h0_, z20_, h1_, z21_, h2_;
  std::vector<std::uint8_t> mask20_, mask21_;
  std::vector<std::vector<int>> part_shapes_;
};

using Network = NetworkT<float>;

}  // namespace rebox
