#include "rfdna/nn/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace rfdna::nn {

namespace {

template <typename T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatT<T>>;
template <typename T>
using CMapM = Eigen::Map<const MatT<T>>;
template <typename T>
using MapV = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using CMapV = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

[[noreturn]] void fail(const Node& n, const std::string& msg) {
  throw std::runtime_error(std::string(kind_name(n.kind)) + " node '" + n.name + "': " + msg);
}

// cols[(c*kh+ki)*kw+kj, gh*GW+gw] = img[c, gh*sh - pt + ki, gw*sw - pl + kj],
// zero outside the image. The "grid" (GH x GW) is the conv output grid for a
// forward convolution and the deconv *input* grid for a transposed one.
template <typename T>
void im2col(const T* img, int C, int IH, int IW, int GH, int GW, int kh, int kw, int sh, int sw,
            int pt, int pl, T* cols) {
  const int G = GH * GW;
  for (int c = 0; c < C; ++c) {
    const T* plane = img + static_cast<size_t>(c) * IH * IW;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        T* row = cols + static_cast<size_t>((c * kh + ki) * kw + kj) * G;
        for (int gh = 0; gh < GH; ++gh) {
          const int ih = gh * sh - pt + ki;
          T* dst = row + static_cast<size_t>(gh) * GW;
          if (ih < 0 || ih >= IH) {
            std::memset(dst, 0, sizeof(T) * static_cast<size_t>(GW));
            continue;
          }
          const T* src = plane + static_cast<size_t>(ih) * IW;
          for (int gw = 0; gw < GW; ++gw) {
            const int iw = gw * sw - pl + kj;
            dst[gw] = (iw < 0 || iw >= IW) ? T(0) : src[iw];
          }
        }
      }
    }
  }
}

// scatter-add inverse of im2col
template <typename T>
void col2im(const T* cols, int C, int IH, int IW, int GH, int GW, int kh, int kw, int sh, int sw,
            int pt, int pl, T* img) {
  const int G = GH * GW;
  for (int c = 0; c < C; ++c) {
    T* plane = img + static_cast<size_t>(c) * IH * IW;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const T* row = cols + static_cast<size_t>((c * kh + ki) * kw + kj) * G;
        for (int gh = 0; gh < GH; ++gh) {
          const int ih = gh * sh - pt + ki;
          if (ih < 0 || ih >= IH) continue;
          T* dst = plane + static_cast<size_t>(ih) * IW;
          const T* src = row + static_cast<size_t>(gh) * GW;
          for (int gw = 0; gw < GW; ++gw) {
            const int iw = gw * sw - pl + kj;
            if (iw >= 0 && iw < IW) dst[iw] += src[gw];
          }
        }
      }
    }
  }
}

struct ConvGeom {
  int OH, OW, pt, pl;
};

// "same" padding: output (ceil(H/sh), ceil(W/sw))
ConvGeom conv_geom(int H, int W, int kh, int kw, int sh, int sw) {
  ConvGeom g{};
  g.OH = (H + sh - 1) / sh;
  g.OW = (W + sw - 1) / sw;
  const int pad_h = std::max(0, (g.OH - 1) * sh + kh - H);
  const int pad_w = std::max(0, (g.OW - 1) * sw + kw - W);
  g.pt = pad_h / 2;
  g.pl = pad_w / 2;
  return g;
}

// transposed conv producing exactly (H*sh, W*sw); requires k >= s
struct DeconvGeom {
  int OH, OW, pt, pl;
};

DeconvGeom deconv_geom(const Node& n, int H, int W) {
  if (n.kh < n.sh || n.kw < n.sw) fail(n, "kernel must be >= stride");
  DeconvGeom g{};
  g.OH = H * n.sh;
  g.OW = W * n.sw;
  g.pt = (n.kh - n.sh) / 2;
  g.pl = (n.kw - n.sw) / 2;
  return g;
}

}  // namespace

const char* act_name(Act a) {
  switch (a) {
    case Act::linear: return "linear";
    case Act::relu: return "relu";
    case Act::leaky_relu: return "leaky_relu";
    case Act::sigmoid: return "sigmoid";
    case Act::tanh_act: return "tanh";
    case Act::softmax: return "softmax";
  }
  return "?";
}

Act act_from_name(const std::string& s) {
  if (s == "linear") return Act::linear;
  if (s == "relu") return Act::relu;
  if (s == "leaky_relu") return Act::leaky_relu;
  if (s == "sigmoid") return Act::sigmoid;
  if (s == "tanh") return Act::tanh_act;
  if (s == "softmax") return Act::softmax;
  throw std::runtime_error("unknown activation '" + s + "'");
}

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::input: return "input";
    case Kind::input_labels: return "input_labels";
    case Kind::conv2d: return "conv2d";
    case Kind::deconv2d: return "deconv2d";
    case Kind::dense: return "dense";
    case Kind::embedding: return "embedding";
    case Kind::maxpool2d: return "maxpool2d";
    case Kind::activation: return "activation";
    case Kind::reshape: return "reshape";
    case Kind::concat: return "concat";
    case Kind::flatten: return "flatten";
    case Kind::dropout: return "dropout";
  }
  return "?";
}

// ---------------------------------------------------------------- Workspace

template <typename T>
void Workspace<T>::set_input(int node, Tensor<T> v) {
  if (v.shape.empty()) throw std::invalid_argument("set_input: scalar tensors not supported");
  if (batch != 0 && v.shape[0] != batch) {
    throw std::invalid_argument("set_input: batch " + std::to_string(v.shape[0]) +
                                " conflicts with staged batch " + std::to_string(batch));
  }
  batch = v.shape[0];
  out[static_cast<size_t>(node)] = std::move(v);
  computed[static_cast<size_t>(node)] = 1;
}

template <typename T>
void Workspace<T>::set_labels(int node, std::vector<int> v) {
  if (batch != 0 && static_cast<int>(v.size()) != batch) {
    throw std::invalid_argument("set_labels: batch mismatch");
  }
  batch = static_cast<int>(v.size());
  labels[static_cast<size_t>(node)] = std::move(v);
  labels_set[static_cast<size_t>(node)] = 1;
}

template <typename T>
void Workspace<T>::reset() {
  std::fill(computed.begin(), computed.end(), 0);
  std::fill(grad_set.begin(), grad_set.end(), 0);
  std::fill(labels_set.begin(), labels_set.end(), 0);
  if (!freeze_masks) std::fill(mask_valid.begin(), mask_valid.end(), 0);
  batch = 0;
}

// ------------------------------------------------------------------- Graph

template <typename T>
int Graph<T>::add_node(Node n) {
  const int id = static_cast<int>(nodes_.size());
  if (n.name.empty()) n.name = "n" + std::to_string(id);
  if (n.name.find(' ') != std::string::npos || n.name.find('\n') != std::string::npos) {
    throw std::invalid_argument("node name '" + n.name + "' contains whitespace");
  }
  for (const Node& other : nodes_) {
    if (other.name == n.name) throw std::invalid_argument("duplicate node name '" + n.name + "'");
  }
  for (int in : n.in) {
    if (in < 0 || in >= id) fail(n, "input id " + std::to_string(in) + " out of range");
  }
  nodes_.push_back(std::move(n));
  return id;
}

template <typename T>
int Graph<T>::new_param(std::vector<int> shape, int node) {
  Param<T> p;
  p.value = Tensor<T>(shape);
  p.grad = Tensor<T>(shape);
  p.m = Tensor<T>(shape);
  p.v = Tensor<T>(shape);
  p.node = node;
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size() - 1);
}

template <typename T>
int Graph<T>::input(std::vector<int> per_sample_shape, const std::string& name) {
  Node n;
  n.kind = Kind::input;
  n.name = name;
  n.out_shape = std::move(per_sample_shape);
  if (n.out_shape.empty()) throw std::invalid_argument("input: empty shape");
  return add_node(std::move(n));
}

template <typename T>
int Graph<T>::input_labels(const std::string& name) {
  Node n;
  n.kind = Kind::input_labels;
  n.name = name;
  return add_node(std::move(n));
}

template <typename T>
int Graph<T>::conv2d(int in, int oc, int kh, int kw, Act act, int sh, int sw,
                     const std::string& name) {
  Node n;
  n.kind = Kind::conv2d;
  n.name = name;
  n.in = {in};
  n.oc = oc;
  n.kh = kh;
  n.kw = kw;
  n.sh = sh;
  n.sw = sw;
  n.init = (act == Act::relu || act == Act::leaky_relu) ? Init::he : Init::xavier;
  const auto& is = nodes_.at(static_cast<size_t>(in)).out_shape;
  if (is.size() != 3) fail(n, "expects (C,H,W) input, got " + shape_str(is));
  if (oc < 1 || kh < 1 || kw < 1 || sh < 1 || sw < 1) fail(n, "bad hyperparameters");
  const ConvGeom geo = conv_geom(is[1], is[2], kh, kw, sh, sw);
  n.out_shape = {oc, geo.OH, geo.OW};
  const int id = static_cast<int>(nodes_.size());
  n.w_param = new_param({oc, is[0] * kh * kw}, id);
  n.b_param = new_param({oc}, id);
  const int cid = add_node(std::move(n));
  return act == Act::linear ? cid : activation(cid, act, 0.2, name.empty() ? "" : name + "_act");
}

template <typename T>
int Graph<T>::deconv2d(int in, int oc, int kh, int kw, Act act, int sh, int sw,
                       const std::string& name) {
  Node n;
  n.kind = Kind::deconv2d;
  n.name = name;
  n.in = {in};
  n.oc = oc;
  n.kh = kh;
  n.kw = kw;
  n.sh = sh;
  n.sw = sw;
  n.init = (act == Act::relu || act == Act::leaky_relu) ? Init::he : Init::xavier;
  const auto& is = nodes_.at(static_cast<size_t>(in)).out_shape;
  if (is.size() != 3) fail(n, "expects (C,H,W) input, got " + shape_str(is));
  if (oc < 1 || kh < 1 || kw < 1 || sh < 1 || sw < 1) fail(n, "bad hyperparameters");
  const DeconvGeom geo = deconv_geom(n, is[1], is[2]);
  n.out_shape = {oc, geo.OH, geo.OW};
  const int id = static_cast<int>(nodes_.size());
  n.w_param = new_param({oc * kh * kw, is[0]}, id);
  n.b_param = new_param({oc}, id);
  const int did = add_node(std::move(n));
  return act == Act::linear ? did : activation(did, act, 0.2, name.empty() ? "" : name + "_act");
}

template <typename T>
int Graph<T>::dense(int in, int units, Act act, const std::string& name) {
  Node n;
  n.kind = Kind::dense;
  n.name = name;
  n.in = {in};
  n.units = units;
  n.init = (act == Act::relu || act == Act::leaky_relu) ? Init::he : Init::xavier;
  const auto& is = nodes_.at(static_cast<size_t>(in)).out_shape;
  if (is.size() != 1) fail(n, "expects flat input, got " + shape_str(is) + " (flatten first)");
  if (units < 1) fail(n, "bad unit count");
  n.out_shape = {units};
  const int id = static_cast<int>(nodes_.size());
  n.w_param = new_param({units, is[0]}, id);
  n.b_param = new_param({units}, id);
  const int did = add_node(std::move(n));
  return act == Act::linear ? did : activation(did, act, 0.2, name.empty() ? "" : name + "_act");
}

template <typename T>
int Graph<T>::embedding(int in, int vocab, int dim, const std::string& name) {
  Node n;
  n.kind = Kind::embedding;
  n.name = name;
  n.in = {in};
  n.vocab = vocab;
  n.dim = dim;
  if (nodes_.at(static_cast<size_t>(in)).kind != Kind::input_labels) {
    fail(n, "input must be an input_labels node");
  }
  if (vocab < 1 || dim < 1) fail(n, "bad vocab/dim");
  n.out_shape = {dim};
  const int id = static_cast<int>(nodes_.size());
  n.w_param = new_param({vocab, dim}, id);
  return add_node(std::move(n));
}

template <typename T>
int Graph<T>::maxpool2d(int in, int ph, int pw, const std::string& name) {
  Node n;
  n.kind = Kind::maxpool2d;
  n.name = name;
  n.in = {in};
  n.ph = ph;
  n.pw = pw;
  const auto& is = nodes_.at(static_cast<size_t>(in)).out_shape;
  if (is.size() != 3) fail(n, "expects (C,H,W) input, got " + shape_str(is));
  if (ph < 1 || pw < 1) fail(n, "bad pool size");
  if (is[1] % ph != 0 || is[2] % pw != 0) {
    fail(n, "input " + shape_str(is) + " not divisible by pool " + std::to_string(ph) + "x" +
                std::to_string(pw));
  }
  n.out_shape = {is[0], is[1] / ph, is[2] / pw};
  return add_node(std::move(n));
}

template <typename T>
int Graph<T>::activation(int in, Act act, double leak, const std::string& name) {
  Node n;
  n.kind = Kind::activation;
  n.name = name;
  n.in = {in};
  n.act = act;
  n.leak = leak;
  const auto& is = nodes_.at(static_cast<size_t>(in)).out_shape;
  if (act == Act::softmax && is.size() != 1) {
    fail(n, "softmax expects flat input, got " + shape_str(is));
  }
  n.out_shape = is;
  return add_node(std::move(n));
}

template <typename T>
int Graph<T>::reshape(int in, std::vector<int> per_sample_shape, const std::string& name) {
  Node n;
  n.kind = Kind::reshape;
  n.name = name;
  n.in = {in};
  const auto& is = nodes_.at(static_cast<size_t>(in)).out_shape;
  if (Tensor<T>::count(per_sample_shape) != Tensor<T>::count(is)) {
    fail(n, "cannot reshape " + shape_str(is) + " to " + shape_str(per_sample_shape));
  }
  n.out_shape = std::move(per_sample_shape);
  return add_node(std::move(n));
}

template <typename T>
int Graph<T>::flatten(int in, const std::string& name) {
  const auto& is = nodes_.at(static_cast<size_t>(in)).out_shape;
  return reshape(in, {static_cast<int>(Tensor<T>::count(is))}, name);
}

template <typename T>
int Graph<T>::concat(const std::vector<int>& ins, const std::string& name) {
  Node n;
  n.kind = Kind::concat;
  n.name = name;
  n.in = ins;
  if (ins.size() < 2) fail(n, "needs at least two inputs");
  std::vector<int> shape = nodes_.at(static_cast<size_t>(ins[0])).out_shape;
  for (size_t i = 1; i < ins.size(); ++i) {
    const auto& is = nodes_.at(static_cast<size_t>(ins[i])).out_shape;
    if (is.size() != shape.size()) {
      fail(n, "rank mismatch: " + shape_str(shape) + " vs " + shape_str(is));
    }
    for (size_t d = 1; d < shape.size(); ++d) {
      if (is[d] != shape[d]) {
        fail(n, "trailing-dimension mismatch: " + shape_str(shape) + " vs " + shape_str(is));
      }
    }
    shape[0] += is[0];
  }
  n.out_shape = std::move(shape);
  return add_node(std::move(n));
}

template <typename T>
int Graph<T>::dropout(int in, double rate, const std::string& name) {
  Node n;
  n.kind = Kind::dropout;
  n.name = name;
  n.in = {in};
  n.rate = rate;
  if (rate < 0.0 || rate >= 1.0) fail(n, "rate must be in [0, 1)");
  n.out_shape = nodes_.at(static_cast<size_t>(in)).out_shape;
  return add_node(std::move(n));
}

template <typename T>
void Graph<T>::init_params(uint64_t seed) {
  for (size_t i = 0; i < params_.size(); ++i) {
    Param<T>& p = params_[i];
    const Node& n = nodes_.at(static_cast<size_t>(p.node));
    const bool is_bias = (n.b_param == static_cast<int>(i));
    if (is_bias) {
      p.value.fill(T(0));
      continue;
    }
    double fan_in = 0, fan_out = 0;
    switch (n.kind) {
      case Kind::conv2d:
        fan_in = static_cast<double>(p.value.shape[1]);
        fan_out = static_cast<double>(n.oc) * n.kh * n.kw;
        break;
      case Kind::deconv2d:
        fan_in = static_cast<double>(p.value.shape[1]) * n.kh * n.kw;
        fan_out = static_cast<double>(n.oc) * n.kh * n.kw;
        break;
      case Kind::dense:
        fan_in = static_cast<double>(p.value.shape[1]);
        fan_out = static_cast<double>(n.units);
        break;
      case Kind::embedding:
        fan_in = static_cast<double>(n.vocab);
        fan_out = static_cast<double>(n.dim);
        break;
      default:
        fan_in = fan_out = static_cast<double>(p.value.size());
        break;
    }
    const double bound = (n.init == Init::he) ? std::sqrt(6.0 / fan_in)
                                              : std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(derive_seed(seed, i));
    for (T& v : p.value.data) v = static_cast<T>(rng.uniform(-bound, bound));
    p.m.fill(T(0));
    p.v.fill(T(0));
    p.steps = 0;
  }
  mask_rng_ = Rng(derive_seed(seed, 0xd0u));
}

template <typename T>
int Graph<T>::find(const std::string& name) const {
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

template <typename T>
int Graph<T>::pre_activation(int id) const {
  const Node& n = nodes_.at(static_cast<size_t>(id));
  return n.kind == Kind::activation ? n.in[0] : id;
}

template <typename T>
int64_t Graph<T>::n_parameters() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
Workspace<T> Graph<T>::make_workspace() const {
  Workspace<T> ws;
  const size_t n = nodes_.size();
  ws.out.resize(n);
  ws.computed.assign(n, 0);
  ws.grad.resize(n);
  ws.grad_set.assign(n, 0);
  ws.argmax.resize(n);
  ws.mask.resize(n);
  ws.mask_valid.assign(n, 0);
  ws.labels.resize(n);
  ws.labels_set.assign(n, 0);
  ws.eval_count.assign(n, 0);
  return ws;
}

// ------------------------------------------------------------ forward pass

template <typename T>
const Tensor<T>& Graph<T>::forward(Workspace<T>& ws, int node) const {
  if (node < 0 || node >= n_nodes()) throw std::invalid_argument("forward: bad node id");
  // mark ancestors
  std::vector<char> needed(nodes_.size(), 0);
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (needed[static_cast<size_t>(id)]) continue;
    needed[static_cast<size_t>(id)] = 1;
    for (int in : nodes_[static_cast<size_t>(id)].in) stack.push_back(in);
  }
  // staged inputs must match the declared per-sample shape (plus batch dim)
  for (size_t id = 0; id <= static_cast<size_t>(node); ++id) {
    const Node& n = nodes_[id];
    if (!needed[id] || n.kind != Kind::input || !ws.computed[id]) continue;
    const auto& got = ws.out[id].shape;
    const bool ok = got.size() == n.out_shape.size() + 1 &&
                    std::equal(n.out_shape.begin(), n.out_shape.end(), got.begin() + 1);
    if (!ok) {
      fail(n, "staged tensor shape " + shape_str(got) + " does not match input shape " +
                  shape_str(n.out_shape) + " plus a batch dimension");
    }
  }
  for (size_t id = 0; id <= static_cast<size_t>(node); ++id) {
    if (!needed[id] || ws.computed[id]) continue;
    eval_node(ws, static_cast<int>(id));
    ws.computed[id] = 1;
  }
  return ws.out[static_cast<size_t>(node)];
}

template <typename T>
void Graph<T>::eval_node(Workspace<T>& ws, int id) const {
  const Node& n = nodes_[static_cast<size_t>(id)];
  ws.eval_count[static_cast<size_t>(id)]++;

  auto batched = [&](const std::vector<int>& per_sample) {
    std::vector<int> s;
    s.reserve(per_sample.size() + 1);
    s.push_back(ws.batch);
    s.insert(s.end(), per_sample.begin(), per_sample.end());
    return s;
  };

  switch (n.kind) {
    case Kind::input:
      fail(n, "input tensor not staged in workspace");
    case Kind::input_labels:
      if (!ws.labels_set[static_cast<size_t>(id)]) fail(n, "labels not staged in workspace");
      return;  // consumed directly by embedding
    default:
      break;
  }
  if (ws.batch <= 0) fail(n, "no inputs staged");
  for (int in : n.in) {
    const Node& up = nodes_[static_cast<size_t>(in)];
    if (up.kind == Kind::input_labels) {
      if (!ws.labels_set[static_cast<size_t>(in)]) fail(up, "labels not staged in workspace");
    } else if (!ws.computed[static_cast<size_t>(in)]) {
      fail(up, "internal: dependency not computed");
    }
  }

  Tensor<T>& out = ws.out[static_cast<size_t>(id)];
  out.shape = batched(n.out_shape);
  out.data.assign(static_cast<size_t>(Tensor<T>::count(out.shape)), T(0));
  const int B = ws.batch;

  switch (n.kind) {
    case Kind::conv2d: {
      const Tensor<T>& x = ws.out[static_cast<size_t>(n.in[0])];
      const int IC = x.shape[1], H = x.shape[2], W = x.shape[3];
      const ConvGeom g = conv_geom(H, W, n.kh, n.kw, n.sh, n.sw);
      const int KR = IC * n.kh * n.kw, G = g.OH * g.OW;
      ws.colbuf.resize(static_cast<size_t>(KR) * G);
      const Param<T>& wp = params_[static_cast<size_t>(n.w_param)];
      const Param<T>& bp = params_[static_cast<size_t>(n.b_param)];
      CMapM<T> wm(wp.value.ptr(), n.oc, KR);
      CMapV<T> bv(bp.value.ptr(), n.oc);
      for (int b = 0; b < B; ++b) {
        im2col(x.ptr() + static_cast<size_t>(b) * IC * H * W, IC, H, W, g.OH, g.OW, n.kh, n.kw,
               n.sh, n.sw, g.pt, g.pl, ws.colbuf.data());
        CMapM<T> cols(ws.colbuf.data(), KR, G);
        MapM<T> om(out.ptr() + static_cast<size_t>(b) * n.oc * G, n.oc, G);
        om.noalias() = wm * cols;
        om.colwise() += bv;
      }
      return;
    }
    case Kind::deconv2d: {
      const Tensor<T>& x = ws.out[static_cast<size_t>(n.in[0])];
      const int IC = x.shape[1], H = x.shape[2], W = x.shape[3];
      const DeconvGeom g = deconv_geom(n, H, W);
      const int KR = n.oc * n.kh * n.kw, G = H * W;
      ws.colbuf.resize(static_cast<size_t>(KR) * G);
      const Param<T>& wp = params_[static_cast<size_t>(n.w_param)];
      const Param<T>& bp = params_[static_cast<size_t>(n.b_param)];
      CMapM<T> wm(wp.value.ptr(), KR, IC);
      for (int b = 0; b < B; ++b) {
        CMapM<T> xm(x.ptr() + static_cast<size_t>(b) * IC * G, IC, G);
        MapM<T> pm(ws.colbuf.data(), KR, G);
        pm.noalias() = wm * xm;
        T* ob = out.ptr() + static_cast<size_t>(b) * n.oc * g.OH * g.OW;
        col2im(ws.colbuf.data(), n.oc, g.OH, g.OW, H, W, n.kh, n.kw, n.sh, n.sw, g.pt, g.pl, ob);
        // per-channel bias
        for (int c = 0; c < n.oc; ++c) {
          const T bias = bp.value.data[static_cast<size_t>(c)];
          T* plane = ob + static_cast<size_t>(c) * g.OH * g.OW;
          for (int i = 0; i < g.OH * g.OW; ++i) plane[i] += bias;
        }
      }
      return;
    }
    case Kind::dense: {
      const Tensor<T>& x = ws.out[static_cast<size_t>(n.in[0])];
      const int D = x.shape[1];
      const Param<T>& wp = params_[static_cast<size_t>(n.w_param)];
      const Param<T>& bp = params_[static_cast<size_t>(n.b_param)];
      CMapM<T> xm(x.ptr(), B, D);
      CMapM<T> wm(wp.value.ptr(), n.units, D);
      CMapV<T> bv(bp.value.ptr(), n.units);
      MapM<T> om(out.ptr(), B, n.units);
      om.noalias() = xm * wm.transpose();
      om.rowwise() += bv.transpose();
      return;
    }
    case Kind::embedding: {
      const std::vector<int>& lab = ws.labels[static_cast<size_t>(n.in[0])];
      const Param<T>& wp = params_[static_cast<size_t>(n.w_param)];
      for (int b = 0; b < B; ++b) {
        const int y = lab[static_cast<size_t>(b)];
        if (y < 0 || y >= n.vocab) {
          fail(n, "label " + std::to_string(y) + " out of range [0," + std::to_string(n.vocab) + ")");
        }
        std::memcpy(out.ptr() + static_cast<size_t>(b) * n.dim,
                    wp.value.ptr() + static_cast<size_t>(y) * n.dim,
                    sizeof(T) * static_cast<size_t>(n.dim));
      }
      return;
    }
    case Kind::maxpool2d: {
      const Tensor<T>& x = ws.out[static_cast<size_t>(n.in[0])];
      const int C = x.shape[1], H = x.shape[2], W = x.shape[3];
      const int OH = H / n.ph, OW = W / n.pw;
      auto& arg = ws.argmax[static_cast<size_t>(id)];
      arg.assign(static_cast<size_t>(B) * C * OH * OW, 0);
      for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
          const T* plane = x.ptr() + (static_cast<size_t>(b) * C + c) * H * W;
          T* oplane = out.ptr() + (static_cast<size_t>(b) * C + c) * OH * OW;
          int* aplane = arg.data() + (static_cast<size_t>(b) * C + c) * OH * OW;
          for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
              int best = (oh * n.ph) * W + ow * n.pw;
              T bv = plane[best];
              for (int i = 0; i < n.ph; ++i) {
                for (int j = 0; j < n.pw; ++j) {
                  const int idx = (oh * n.ph + i) * W + ow * n.pw + j;
                  if (plane[idx] > bv) {
                    bv = plane[idx];
                    best = idx;
                  }
                }
              }
              oplane[oh * OW + ow] = bv;
              aplane[oh * OW + ow] = best;
            }
          }
        }
      }
      return;
    }
    case Kind::activation: {
      const Tensor<T>& x = ws.out[static_cast<size_t>(n.in[0])];
      const size_t total = x.data.size();
      switch (n.act) {
        case Act::linear:
          out.data = x.data;
          return;
        case Act::relu:
          for (size_t i = 0; i < total; ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
          return;
        case Act::leaky_relu: {
          const T leak = static_cast<T>(n.leak);
          for (size_t i = 0; i < total; ++i) {
            out.data[i] = x.data[i] > T(0) ? x.data[i] : leak * x.data[i];
          }
          return;
        }
        case Act::sigmoid:
          for (size_t i = 0; i < total; ++i) {
            const T v = x.data[i];
            if (v >= T(0)) {
              out.data[i] = T(1) / (T(1) + std::exp(-v));
            } else {
              const T e = std::exp(v);
              out.data[i] = e / (T(1) + e);
            }
          }
          return;
        case Act::tanh_act:
          for (size_t i = 0; i < total; ++i) out.data[i] = std::tanh(x.data[i]);
          return;
        case Act::softmax: {
          const int D = n.out_shape[0];
          for (int b = 0; b < B; ++b) {
            const T* row = x.ptr() + static_cast<size_t>(b) * D;
            T* orow = out.ptr() + static_cast<size_t>(b) * D;
            T mx = row[0];
            for (int i = 1; i < D; ++i) mx = std::max(mx, row[i]);
            T sum = T(0);
            for (int i = 0; i < D; ++i) {
              orow[i] = std::exp(row[i] - mx);
              sum += orow[i];
            }
            for (int i = 0; i < D; ++i) orow[i] /= sum;
          }
          return;
        }
      }
      return;
    }
    case Kind::reshape:
    case Kind::flatten:
      out.data = ws.out[static_cast<size_t>(n.in[0])].data;
      return;
    case Kind::concat: {
      const size_t per_out = static_cast<size_t>(Tensor<T>::count(n.out_shape));
      size_t offset = 0;
      for (int in : n.in) {
        const Tensor<T>& x = ws.out[static_cast<size_t>(in)];
        const size_t per_in = x.data.size() / static_cast<size_t>(B);
        for (int b = 0; b < B; ++b) {
          std::memcpy(out.ptr() + static_cast<size_t>(b) * per_out + offset,
                      x.ptr() + static_cast<size_t>(b) * per_in, sizeof(T) * per_in);
        }
        offset += per_in;
      }
      return;
    }
    case Kind::dropout: {
      const Tensor<T>& x = ws.out[static_cast<size_t>(n.in[0])];
      if (!ws.training || n.rate == 0.0) {
        out.data = x.data;
        ws.mask_valid[static_cast<size_t>(id)] = 0;
        return;
      }
      Tensor<T>& mask = ws.mask[static_cast<size_t>(id)];
      const bool reuse = ws.freeze_masks && ws.mask_valid[static_cast<size_t>(id)] &&
                         mask.data.size() == x.data.size();
      if (!reuse) {
        mask.shape = x.shape;
        mask.data.resize(x.data.size());
        const T scale = static_cast<T>(1.0 / (1.0 - n.rate));
        for (size_t i = 0; i < mask.data.size(); ++i) {
          mask.data[i] = (mask_rng_.uniform() < n.rate) ? T(0) : scale;
        }
        ws.mask_valid[static_cast<size_t>(id)] = 1;
      }
      for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = x.data[i] * mask.data[i];
      return;
    }
    default:
      fail(n, "internal: unhandled kind in eval");
  }
}

// ----------------------------------------------------------- backward pass

template <typename T>
void Graph<T>::backward(Workspace<T>& ws, int node, const Tensor<T>& seed) {
  if (node < 0 || node >= n_nodes()) throw std::invalid_argument("backward: bad node id");
  if (!ws.computed[static_cast<size_t>(node)]) {
    throw std::runtime_error("backward: node '" + nodes_[static_cast<size_t>(node)].name +
                             "' was not computed by a forward pass");
  }
  if (seed.shape != ws.out[static_cast<size_t>(node)].shape) {
    throw std::invalid_argument("backward: seed shape " + shape_str(seed.shape) +
                                " does not match output " +
                                shape_str(ws.out[static_cast<size_t>(node)].shape));
  }
  std::fill(ws.grad_set.begin(), ws.grad_set.end(), 0);
  ws.grad[static_cast<size_t>(node)] = seed;
  ws.grad_set[static_cast<size_t>(node)] = 1;
  for (int id = node; id >= 0; --id) {
    if (ws.grad_set[static_cast<size_t>(id)] && ws.computed[static_cast<size_t>(id)]) {
      grad_node(ws, id);
    }
  }
}

namespace {

template <typename T>
Tensor<T>& ensure_grad(Workspace<T>& ws, int id) {
  Tensor<T>& g = ws.grad[static_cast<size_t>(id)];
  if (!ws.grad_set[static_cast<size_t>(id)]) {
    const Tensor<T>& o = ws.out[static_cast<size_t>(id)];
    g.shape = o.shape;
    g.data.assign(o.data.size(), T(0));
    ws.grad_set[static_cast<size_t>(id)] = 1;
  }
  return g;
}

}  // namespace

template <typename T>
void Graph<T>::grad_node(Workspace<T>& ws, int id) {
  const Node& n = nodes_[static_cast<size_t>(id)];
  const Tensor<T>& dout = ws.grad[static_cast<size_t>(id)];
  const int B = ws.batch;

  switch (n.kind) {
    case Kind::input:
    case Kind::input_labels:
      return;
    case Kind::conv2d: {
      const Tensor<T>& x = ws.out[static_cast<size_t>(n.in[0])];
      const int IC = x.shape[1], H = x.shape[2], W = x.shape[3];
      const ConvGeom g = conv_geom(H, W, n.kh, n.kw, n.sh, n.sw);
      const int KR = IC * n.kh * n.kw, G = g.OH * g.OW;
      ws.colbuf.resize(static_cast<size_t>(KR) * G);
      ws.colbuf2.resize(static_cast<size_t>(KR) * G);
      Param<T>& wp = params_[static_cast<size_t>(n.w_param)];
      Param<T>& bp = params_[static_cast<size_t>(n.b_param)];
      wp.touched = bp.touched = true;
      MapM<T> dwm(wp.grad.ptr(), n.oc, KR);
      MapV<T> dbv(bp.grad.ptr(), n.oc);
      CMapM<T> wm(wp.value.ptr(), n.oc, KR);
      Tensor<T>& dx = ensure_grad(ws, n.in[0]);
      for (int b = 0; b < B; ++b) {
        im2col(x.ptr() + static_cast<size_t>(b) * IC * H * W, IC, H, W, g.OH, g.OW, n.kh, n.kw,
               n.sh, n.sw, g.pt, g.pl, ws.colbuf.data());
        CMapM<T> cols(ws.colbuf.data(), KR, G);
        CMapM<T> dom(dout.ptr() + static_cast<size_t>(b) * n.oc * G, n.oc, G);
        dwm.noalias() += dom * cols.transpose();
        dbv.noalias() += dom.rowwise().sum();
        MapM<T> dcols(ws.colbuf2.data(), KR, G);
        dcols.noalias() = wm.transpose() * dom;
        col2im(ws.colbuf2.data(), IC, H, W, g.OH, g.OW, n.kh, n.kw, n.sh, n.sw, g.pt, g.pl,
               dx.ptr() + static_cast<size_t>(b) * IC * H * W);
      }
      return;
    }
    case Kind::deconv2d: {
      const Tensor<T>& x = ws.out[static_cast<size_t>(n.in[0])];
      const int IC = x.shape[1], H = x.shape[2], W = x.shape[3];
      const DeconvGeom g = deconv_geom(n, H, W);
      const int KR = n.oc * n.kh * n.kw, G = H * W;
      ws.colbuf.resize(static_cast<size_t>(KR) * G);
      Param<T>& wp = params_[static_cast<size_t>(n.w_param)];
      Param<T>& bp = params_[static_cast<size_t>(n.b_param)];
      wp.touched = bp.touched = true;
      MapM<T> dwm(wp.grad.ptr(), KR, IC);
      CMapM<T> wm(wp.value.ptr(), KR, IC);
      Tensor<T>& dx = ensure_grad(ws, n.in[0]);
      for (int b = 0; b < B; ++b) {
        const T* db = dout.ptr() + static_cast<size_t>(b) * n.oc * g.OH * g.OW;
        // dP = gather of dout by the scatter map
        im2col(db, n.oc, g.OH, g.OW, H, W, n.kh, n.kw, n.sh, n.sw, g.pt, g.pl, ws.colbuf.data());
        CMapM<T> dpm(ws.colbuf.data(), KR, G);
        CMapM<T> xm(x.ptr() + static_cast<size_t>(b) * IC * G, IC, G);
        dwm.noalias() += dpm * xm.transpose();
        MapM<T> dxm(dx.ptr() + static_cast<size_t>(b) * IC * G, IC, G);
        dxm.noalias() += wm.transpose() * dpm;
        for (int c = 0; c < n.oc; ++c) {
          const T* plane = db + static_cast<size_t>(c) * g.OH * g.OW;
          T acc = T(0);
          for (int i = 0; i < g.OH * g.OW; ++i) acc += plane[i];
          bp.grad.data[static_cast<size_t>(c)] += acc;
        }
      }
      return;
    }
    case Kind::dense: {
      const Tensor<T>& x = ws.out[static_cast<size_t>(n.in[0])];
      const int D = x.shape[1];
      Param<T>& wp = params_[static_cast<size_t>(n.w_param)];
      Param<T>& bp = params_[static_cast<size_t>(n.b_param)];
      wp.touched = bp.touched = true;
      CMapM<T> xm(x.ptr(), B, D);
      CMapM<T> dom(dout.ptr(), B, n.units);
      MapM<T> dwm(wp.grad.ptr(), n.units, D);
      MapV<T> dbv(bp.grad.ptr(), n.units);
      dwm.noalias() += dom.transpose() * xm;
      dbv.noalias() += dom.colwise().sum().transpose();
      Tensor<T>& dx = ensure_grad(ws, n.in[0]);
      MapM<T> dxm(dx.ptr(), B, D);
      CMapM<T> wm(wp.value.ptr(), n.units, D);
      dxm.noalias() += dom * wm;
      return;
    }
    case Kind::embedding: {
      const std::vector<int>& lab = ws.labels[static_cast<size_t>(n.in[0])];
      Param<T>& wp = params_[static_cast<size_t>(n.w_param)];
      wp.touched = true;
      for (int b = 0; b < B; ++b) {
        const int y = lab[static_cast<size_t>(b)];
        T* row = wp.grad.ptr() + static_cast<size_t>(y) * n.dim;
        const T* src = dout.ptr() + static_cast<size_t>(b) * n.dim;
        for (int i = 0; i < n.dim; ++i) row[i] += src[i];
      }
      return;
    }
    case Kind::maxpool2d: {
      const Tensor<T>& x = ws.out[static_cast<size_t>(n.in[0])];
      const int C = x.shape[1], H = x.shape[2], W = x.shape[3];
      const int OH = H / n.ph, OW = W / n.pw;
      const auto& arg = ws.argmax[static_cast<size_t>(id)];
      Tensor<T>& dx = ensure_grad(ws, n.in[0]);
      for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
          const size_t po = (static_cast<size_t>(b) * C + c) * OH * OW;
          const size_t pi = (static_cast<size_t>(b) * C + c) * H * W;
          for (int i = 0; i < OH * OW; ++i) {
            dx.data[pi + static_cast<size_t>(arg[po + static_cast<size_t>(i)])] +=
                dout.data[po + static_cast<size_t>(i)];
          }
        }
      }
      return;
    }
    case Kind::activation: {
      const Tensor<T>& x = ws.out[static_cast<size_t>(n.in[0])];
      const Tensor<T>& y = ws.out[static_cast<size_t>(id)];
      Tensor<T>& dx = ensure_grad(ws, n.in[0]);
      const size_t total = x.data.size();
      switch (n.act) {
        case Act::linear:
          for (size_t i = 0; i < total; ++i) dx.data[i] += dout.data[i];
          return;
        case Act::relu:
          for (size_t i = 0; i < total; ++i) {
            if (x.data[i] > T(0)) dx.data[i] += dout.data[i];
          }
          return;
        case Act::leaky_relu: {
          const T leak = static_cast<T>(n.leak);
          for (size_t i = 0; i < total; ++i) {
            dx.data[i] += x.data[i] > T(0) ? dout.data[i] : leak * dout.data[i];
          }
          return;
        }
        case Act::sigmoid:
          for (size_t i = 0; i < total; ++i) {
            dx.data[i] += dout.data[i] * y.data[i] * (T(1) - y.data[i]);
          }
          return;
        case Act::tanh_act:
          for (size_t i = 0; i < total; ++i) {
            dx.data[i] += dout.data[i] * (T(1) - y.data[i] * y.data[i]);
          }
          return;
        case Act::softmax: {
          const int D = n.out_shape[0];
          for (int b = 0; b < B; ++b) {
            const T* yr = y.ptr() + static_cast<size_t>(b) * D;
            const T* dr = dout.ptr() + static_cast<size_t>(b) * D;
            T* dxr = dx.ptr() + static_cast<size_t>(b) * D;
            T dot = T(0);
            for (int i = 0; i < D; ++i) dot += dr[i] * yr[i];
            for (int i = 0; i < D; ++i) dxr[i] += yr[i] * (dr[i] - dot);
          }
          return;
        }
      }
      return;
    }
    case Kind::reshape:
    case Kind::flatten: {
      Tensor<T>& dx = ensure_grad(ws, n.in[0]);
      for (size_t i = 0; i < dout.data.size(); ++i) dx.data[i] += dout.data[i];
      return;
    }
    case Kind::concat: {
      const size_t per_out = dout.data.size() / static_cast<size_t>(B);
      size_t offset = 0;
      for (int in : n.in) {
        Tensor<T>& dx = ensure_grad(ws, in);
        const size_t per_in = dx.data.size() / static_cast<size_t>(B);
        for (int b = 0; b < B; ++b) {
          const T* src = dout.ptr() + static_cast<size_t>(b) * per_out + offset;
          T* dst = dx.ptr() + static_cast<size_t>(b) * per_in;
          for (size_t i = 0; i < per_in; ++i) dst[i] += src[i];
        }
        offset += per_in;
      }
      return;
    }
    case Kind::dropout: {
      Tensor<T>& dx = ensure_grad(ws, n.in[0]);
      if (ws.mask_valid[static_cast<size_t>(id)]) {
        const Tensor<T>& mask = ws.mask[static_cast<size_t>(id)];
        for (size_t i = 0; i < dout.data.size(); ++i) dx.data[i] += dout.data[i] * mask.data[i];
      } else {
        for (size_t i = 0; i < dout.data.size(); ++i) dx.data[i] += dout.data[i];
      }
      return;
    }
    default:
      fail(n, "internal: unhandled kind in backward");
  }
}

template <typename T>
void Graph<T>::zero_grad() {
  for (auto& p : params_) {
    p.grad.fill(T(0));
    p.touched = false;
  }
}

template <typename T>
void Graph<T>::step(const OptimConfig& opt) {
  for (size_t i = 0; i < params_.size(); ++i) {
    Param<T>& p = params_[i];
    if (!p.touched) continue;
    const Node& n = nodes_[static_cast<size_t>(p.node)];
    const bool is_bias = (n.b_param == static_cast<int>(i));
    const T lr = static_cast<T>(opt.lr);
    if (opt.l2 > 0.0 && !is_bias) {
      const T l2 = static_cast<T>(opt.l2);
      for (size_t j = 0; j < p.grad.data.size(); ++j) p.grad.data[j] += l2 * p.value.data[j];
    }
    if (opt.kind == OptimConfig::Kind::sgd) {
      for (size_t j = 0; j < p.value.data.size(); ++j) p.value.data[j] -= lr * p.grad.data[j];
    } else {
      p.steps++;
      const T b1 = static_cast<T>(opt.beta1), b2 = static_cast<T>(opt.beta2);
      const T eps = static_cast<T>(opt.eps);
      const T c1 = T(1) - static_cast<T>(std::pow(opt.beta1, static_cast<double>(p.steps)));
      const T c2 = T(1) - static_cast<T>(std::pow(opt.beta2, static_cast<double>(p.steps)));
      for (size_t j = 0; j < p.value.data.size(); ++j) {
        const T g = p.grad.data[j];
        p.m.data[j] = b1 * p.m.data[j] + (T(1) - b1) * g;
        p.v.data[j] = b2 * p.v.data[j] + (T(1) - b2) * g * g;
        const T mhat = p.m.data[j] / c1;
        const T vhat = p.v.data[j] / c2;
        p.value.data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
    p.grad.fill(T(0));
    p.touched = false;
  }
}

// ------------------------------------------------------------ description

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

}  // namespace

template <typename T>
std::string Graph<T>::describe() const {
  std::string out;
  for (const Node& n : nodes_) {
    out += kind_name(n.kind);
    out += ' ';
    out += n.name;
    switch (n.kind) {
      case Kind::input:
        out += " shape=" + join_ints(n.out_shape);
        break;
      case Kind::input_labels:
        break;
      case Kind::conv2d:
      case Kind::deconv2d:
        out += " in=" + std::to_string(n.in[0]) + " oc=" + std::to_string(n.oc) +
               " kh=" + std::to_string(n.kh) + " kw=" + std::to_string(n.kw) +
               " sh=" + std::to_string(n.sh) + " sw=" + std::to_string(n.sw) +
               " init=" + (n.init == Init::he ? "he" : "xavier");
        break;
      case Kind::dense:
        out += " in=" + std::to_string(n.in[0]) + " units=" + std::to_string(n.units) +
               " init=" + (n.init == Init::he ? "he" : "xavier");
        break;
      case Kind::embedding:
        out += " in=" + std::to_string(n.in[0]) + " vocab=" + std::to_string(n.vocab) +
               " dim=" + std::to_string(n.dim);
        break;
      case Kind::maxpool2d:
        out += " in=" + std::to_string(n.in[0]) + " ph=" + std::to_string(n.ph) +
               " pw=" + std::to_string(n.pw);
        break;
      case Kind::activation:
        out += " in=" + std::to_string(n.in[0]) + " act=" + act_name(n.act);
        if (n.act == Act::leaky_relu) out += " leak=" + fmt_double(n.leak);
        break;
      case Kind::reshape:
        out += " in=" + std::to_string(n.in[0]) + " shape=" + join_ints(n.out_shape);
        break;
      case Kind::flatten:
        out += " in=" + std::to_string(n.in[0]);
        break;
      case Kind::concat:
        out += " in=" + join_ints(n.in);
        break;
      case Kind::dropout:
        out += " in=" + std::to_string(n.in[0]) + " rate=" + fmt_double(n.rate);
        break;
    }
    out += '\n';
  }
  return out;
}

template <typename T>
Graph<T> Graph<T>::from_description(const std::string& text) {
  Graph<T> g;
  std::stringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string kind, name;
    ss >> kind >> name;
    if (kind.empty()) continue;

    std::string tok;
    std::vector<std::pair<std::string, std::string>> kv;
    while (ss >> tok) {
      const size_t eq = tok.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error("model description line " + std::to_string(lineno) +
                                 ": bad token '" + tok + "'");
      }
      kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    auto get = [&](const std::string& key) -> const std::string& {
      for (const auto& [k, v] : kv) {
        if (k == key) return v;
      }
      throw std::runtime_error("model description line " + std::to_string(lineno) +
                               ": missing key '" + key + "'");
    };
    auto geti = [&](const std::string& key) { return std::stoi(get(key)); };

    int made = -1;
    if (kind == "input") {
      made = g.input(split_ints(get("shape")), name);
    } else if (kind == "input_labels") {
      made = g.input_labels(name);
    } else if (kind == "conv2d" || kind == "deconv2d") {
      Node n;
      n.kind = kind == "conv2d" ? Kind::conv2d : Kind::deconv2d;
      n.name = name;
      n.in = {geti("in")};
      n.oc = geti("oc");
      n.kh = geti("kh");
      n.kw = geti("kw");
      n.sh = geti("sh");
      n.sw = geti("sw");
      n.init = get("init") == "he" ? Init::he : Init::xavier;
      const auto& is = g.nodes_.at(static_cast<size_t>(n.in[0])).out_shape;
      if (is.size() != 3) fail(n, "expects (C,H,W) input");
      if (n.kind == Kind::conv2d) {
        const ConvGeom geo = conv_geom(is[1], is[2], n.kh, n.kw, n.sh, n.sw);
        n.out_shape = {n.oc, geo.OH, geo.OW};
        const int id = static_cast<int>(g.nodes_.size());
        n.w_param = g.new_param({n.oc, is[0] * n.kh * n.kw}, id);
        n.b_param = g.new_param({n.oc}, id);
      } else {
        const DeconvGeom geo = deconv_geom(n, is[1], is[2]);
        n.out_shape = {n.oc, geo.OH, geo.OW};
        const int id = static_cast<int>(g.nodes_.size());
        n.w_param = g.new_param({n.oc * n.kh * n.kw, is[0]}, id);
        n.b_param = g.new_param({n.oc}, id);
      }
      made = g.add_node(std::move(n));
    } else if (kind == "dense") {
      Node n;
      n.kind = Kind::dense;
      n.name = name;
      n.in = {geti("in")};
      n.units = geti("units");
      n.init = get("init") == "he" ? Init::he : Init::xavier;
      const auto& is = g.nodes_.at(static_cast<size_t>(n.in[0])).out_shape;
      if (is.size() != 1) fail(n, "expects flat input");
      n.out_shape = {n.units};
      const int id = static_cast<int>(g.nodes_.size());
      n.w_param = g.new_param({n.units, is[0]}, id);
      n.b_param = g.new_param({n.units}, id);
      made = g.add_node(std::move(n));
    } else if (kind == "embedding") {
      made = g.embedding(geti("in"), geti("vocab"), geti("dim"), name);
    } else if (kind == "maxpool2d") {
      made = g.maxpool2d(geti("in"), geti("ph"), geti("pw"), name);
    } else if (kind == "activation") {
      const Act a = act_from_name(get("act"));
      const double leak = a == Act::leaky_relu ? std::stod(get("leak")) : 0.2;
      made = g.activation(geti("in"), a, leak, name);
    } else if (kind == "reshape") {
      made = g.reshape(geti("in"), split_ints(get("shape")), name);
    } else if (kind == "flatten") {
      made = g.flatten(geti("in"), name);
    } else if (kind == "concat") {
      made = g.concat(split_ints(get("in")), name);
    } else if (kind == "dropout") {
      made = g.dropout(geti("in"), std::stod(get("rate")), name);
    } else {
      throw std::runtime_error("model description line " + std::to_string(lineno) +
                               ": unknown layer kind '" + kind + "'");
    }
    (void)made;
  }
  return g;
}

template class Graph<float>;
template class Graph<double>;
template struct Workspace<float>;
template struct Workspace<double>;

}  // namespace rfdna::nn
