#pragma once

// Minimal reverse-mode network kernel. A Graph is a DAG of layer nodes built
// through the add-layer methods; forward/backward run over per-call
// Workspaces so several batches can be staged without aliasing parameters.
// Convolutions are im2col + GEMM (Eigen); everything is single-threaded and
// bit-reproducible for a fixed seed.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rfdna/nn/tensor.hpp"
#include "rfdna/rng.hpp"

namespace rfdna::nn {

enum class Act { linear, relu, leaky_relu, sigmoid, tanh_act, softmax };

const char* act_name(Act a);
Act act_from_name(const std::string& s);

enum class Kind {
  input,
  input_labels,
  conv2d,
  deconv2d,
  dense,
  embedding,
  maxpool2d,
  activation,
  reshape,
  concat,
  flatten,
  dropout,
};

const char* kind_name(Kind k);

enum class Init { he, xavier };

struct Node {
  Kind kind{};
  std::string name;
  std::vector<int> in;         // upstream node ids
  std::vector<int> out_shape;  // per-sample shape
  // layer hyperparameters (meaning depends on kind)
  int oc = 0, kh = 0, kw = 0, sh = 1, sw = 1;
  int units = 0;
  int vocab = 0, dim = 0;
  int ph = 1, pw = 1;
  Act act = Act::linear;
  double leak = 0.2;
  double rate = 0.0;
  Init init = Init::xavier;
  // parameter slots (-1 if none)
  int w_param = -1, b_param = -1;
};

template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m, v;  // Adam state
  int64_t steps = 0;
  bool touched = false;
  int node = -1;
};

struct OptimConfig {
  enum class Kind { sgd, adam } kind = Kind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 0.0;  // L2 penalty added to gradients of weights (not biases)
};

// Per-call execution state: node outputs, gradients, pooling argmaxes and
// dropout masks. reset() keeps allocations for reuse across batches.
template <typename T>
struct Workspace {
  std::vector<Tensor<T>> out;
  std::vector<char> computed;
  std::vector<Tensor<T>> grad;
  std::vector<char> grad_set;
  std::vector<std::vector<int>> argmax;
  std::vector<Tensor<T>> mask;
  std::vector<char> mask_valid;
  std::vector<std::vector<int>> labels;
  std::vector<char> labels_set;
  std::vector<int> eval_count;
  std::vector<T> colbuf;
  std::vector<T> colbuf2;
  bool training = false;
  bool freeze_masks = false;  // keep dropout masks fixed (finite-difference mode)
  int batch = 0;

  void set_input(int node, Tensor<T> v);
  void set_labels(int node, std::vector<int> v);
  void reset();  // clears computed/grad state and inputs, keeps mask freezing
};

template <typename T>
class Graph {
 public:
  // --- builders; each returns the id of the node added last ----------------
  int input(std::vector<int> per_sample_shape, const std::string& name = "");
  int input_labels(const std::string& name = "");
  // conv/deconv/dense compose a linear node and, for act != linear, an
  // activation node; the returned id is the activated output.
  int conv2d(int in, int oc, int kh, int kw, Act act, int sh = 1, int sw = 1,
             const std::string& name = "");
  int deconv2d(int in, int oc, int kh, int kw, Act act, int sh, int sw,
               const std::string& name = "");
  int dense(int in, int units, Act act, const std::string& name = "");
  int embedding(int in, int vocab, int dim, const std::string& name = "");
  int maxpool2d(int in, int ph, int pw, const std::string& name = "");
  int activation(int in, Act act, double leak = 0.2, const std::string& name = "");
  int reshape(int in, std::vector<int> per_sample_shape, const std::string& name = "");
  int flatten(int in, const std::string& name = "");
  int concat(const std::vector<int>& ins, const std::string& name = "");
  int dropout(int in, double rate, const std::string& name = "");

  void init_params(uint64_t seed);

  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_.at(static_cast<size_t>(id)); }
  int find(const std::string& name) const;  // -1 if absent
  // the linear node feeding an activation node (for loss seeding at logits)
  int pre_activation(int id) const;

  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }
  int64_t n_parameters() const;

  Workspace<T> make_workspace() const;

  // Computes `node` (and any uncomputed ancestors) for the inputs staged in
  // the workspace. Throws on missing inputs or batch mismatches.
  const Tensor<T>& forward(Workspace<T>& ws, int node) const;

  // Accumulates dLoss/dparam into params()[...].grad, seeding dLoss/dnode.
  // forward() must already have computed `node` in this workspace.
  void backward(Workspace<T>& ws, int node, const Tensor<T>& seed);

  void zero_grad();
  // applies one optimizer update to every touched parameter, then clears
  // touched flags and gradients
  void step(const OptimConfig& opt);

  // textual structure (one line per node); parseable by from_description
  std::string describe() const;
  static Graph<T> from_description(const std::string& text);

 private:
  int add_node(Node n);
  int new_param(std::vector<int> shape, int node);
  void eval_node(Workspace<T>& ws, int id) const;
  void grad_node(Workspace<T>& ws, int id);

  std::vector<Node> nodes_;
  std::vector<Param<T>> params_;
  mutable Rng mask_rng_{0x6d61736bull};
};

extern template class Graph<float>;
extern template class Graph<double>;
extern template struct Workspace<float>;
extern template struct Workspace<double>;

}  // namespace rfdna::nn
