#pragma once

// Conditional-GAN equalizer: label-conditioned generator (convolutional
// autoencoder) and discriminator, adversarial training, and the
// equalize-then-classify decision rule. Networks carry their own label
// embedding head (label -> embedding -> dense -> plane) and condition by
// concatenating that plane with the data plane; the generator additionally
// regenerates a label channel so its output mirrors its two-channel input,
// and that channel is stripped at the pipeline boundary.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rfdna/nn/graph.hpp"
#include "rfdna/nn/train.hpp"
#include "rfdna/waveform.hpp"

namespace rfdna {

// One training/inference record: the normalized data plane (channel 0 of the
// conceptual two-channel labeled tensor) plus its integer emitter label. The
// label plane (channel 1) is synthesized inside each network.
struct LabeledPreamble {
  nn::Tensor<float> data;  // (1, rows, cols), values in [0, 1]
  int label = 0;
};

// Materialized label conditioning for one label: the embedding vector and
// its expansion to a data-plane-shaped tensor.
struct LabelPlane {
  int label = 0;
  std::vector<float> embedding;
  nn::Tensor<float> plane;  // (1, rows, cols)
};

struct CganConfig {
  int epochs = 10000;
  int batch_size = 256;
  int d_steps = 1;  // discriminator updates per generator update (S)
  nn::OptimConfig g_optim{nn::OptimConfig::Kind::adam, 2e-4, 0.5, 0.999, 1e-8, 0.0};
  nn::OptimConfig d_optim{nn::OptimConfig::Kind::adam, 2e-4, 0.5, 0.999, 1e-8, 0.0};
  uint64_t seed = 0;
  // early stop when both loss curves stay within plateau_tol of their window
  // extremes for plateau_window consecutive epochs (0 disables)
  int plateau_window = 50;
  double plateau_tol = 0.02;
  std::string curves_path;  // per-epoch CSV dump when non-empty

  void validate() const;
};

// A network plus the node ids of its interface points.
template <typename T>
struct CondNet {
  nn::Graph<T> net;
  int in = -1;           // data-plane input (1, rows, cols)
  int labels = -1;       // integer-label input
  int embed = -1;        // embedding vector node
  int label_plane = -1;  // reshaped conditioning plane
  int out = -1;          // generator: (2, rows, cols); discriminator: (1)
  int rows = 0, cols = 0, n_labels = 0, embed_dim = 0;
};

template <typename T>
struct Classifier {
  nn::Graph<T> net;
  int in = -1;
  int prob = -1;  // softmax output (n_labels)
  int rows = 0, cols = 0, n_labels = 0;
};

// encoder conv(16,3x7)+leaky -> pool(1x2) -> conv(32,3x5)+leaky;
// decoder deconv(16,3x5)+leaky -> deconv(2,3x7, stride 1x2)+sigmoid
template <typename T>
CondNet<T> build_generator(int n_labels, int rows, int cols, int embed_dim = 50);

// conv(16,3x7)+leaky -> pool(1x2) -> conv(32,3x5)+leaky -> dense(128)+leaky
// -> dense(1)+sigmoid
template <typename T>
CondNet<T> build_discriminator(int n_labels, int rows, int cols, int embed_dim = 50);

// conv(16,3x7)+relu -> pool(1x2) -> conv(32,3x5)+relu -> dense(128)+relu
// -> dense(n_labels)+softmax
template <typename T>
Classifier<T> build_classifier(int n_labels, int rows, int cols);

extern template CondNet<float> build_generator<float>(int, int, int, int);
extern template CondNet<double> build_generator<double>(int, int, int, int);
extern template CondNet<float> build_discriminator<float>(int, int, int, int);
extern template CondNet<double> build_discriminator<double>(int, int, int, int);
extern template Classifier<float> build_classifier<float>(int, int, int);
extern template Classifier<double> build_classifier<double>(int, int, int);

struct Cgan {
  CondNet<float> g;
  CondNet<float> d;
  bool trained = false;
  mutable int64_t equalize_calls = 0;  // generator invocations (audit)
};

Cgan build_cgan(int n_labels, int rows, int cols, int embed_dim = 50);

struct CganCurves {
  std::vector<double> d_loss, g_loss, d_out_real_mean, d_out_fake_mean;
  int epochs_run = 0;
  bool early_stopped = false;
};

// Evaluates a network's conditioning head for one label.
LabelPlane embed_label(const CondNet<float>& net, int y);

// Adversarial loop: per minibatch, the discriminator takes cfg.d_steps
// updates on (clean=real, generated=fake) batches, then the generator takes
// one non-saturating update through the frozen discriminator. Throws on
// non-finite losses with epoch/batch diagnostics.
CganCurves train_cgan(Cgan& model, const std::vector<LabeledPreamble>& multipath_set,
                      const std::vector<LabeledPreamble>& clean_set, const CganConfig& cfg);

// Runs the generator conditioned on label y and strips the regenerated
// label channel. Throws if the model is untrained.
IqNlTensor cgan_equalize(const Cgan& model, const IqNlTensor& r_norm, int y);

// Builds Q[i][j] = P(class j | input equalized under label i) and returns
// the conditioning label i* of the global maximum; ties resolve to the
// lowest (i, j). q_out (optional) receives the full matrix.
int classify_confidence(const Classifier<float>& cnn, const std::vector<IqNlTensor>& equalized_set,
                        std::vector<std::vector<double>>* q_out = nullptr);

struct GridSearchResult {
  std::vector<std::vector<double>> accuracy;  // [train snr][test snr]
  std::vector<int> best_train_index_per_test;
  std::vector<double> best_train_per_test;
  int best_train_index_overall = -1;  // argmax of mean accuracy over tests
  double best_train_overall = 0.0;
};

// builder(train_snr) trains a pipeline and returns an evaluator mapping a
// test snr to accuracy. Ties resolve to the lowest train-snr index.
GridSearchResult grid_search_train_snr(
    const std::vector<double>& train_snrs, const std::vector<double>& test_snrs,
    const std::function<std::function<double(double)>(double)>& builder);

// Supervised classifier training on (tensor, label) records with fused
// softmax + cross-entropy; returns the per-epoch mean loss curve.
std::vector<double> train_classifier(Classifier<float>& cls,
                                     const std::vector<LabeledPreamble>& data,
                                     const nn::TrainConfig& cfg);

// classifier forward on one normalized tensor -> probability row (n_labels)
nn::Tensor<float> classify_probs(const Classifier<float>& cls, const IqNlTensor& t);

// --- representation plumbing ----------------------------------------------

// (4 x n) normalized tensor -> NN tensor (1, 4, n)
nn::Tensor<float> iqnl_to_tensor(const IqNlTensor& t);

// per-sample (1, rows, cols) NN tensor (or one sample of a batch) -> rows x
// cols IqNlTensor; `sample` selects the batch element when x has a batch dim
IqNlTensor tensor_to_iqnl(const nn::Tensor<float>& x, int sample = 0);

}  // namespace rfdna
