#pragma once

// Jointly trained convolutional autoencoder + classifier: a shared densely
// connected encoder feeding L decoder heads (one per multipath component)
// and an internal classifier head, optimized under a weighted composite
// loss, plus the (L+1)-vote fingerprinting decision.

#include <cstdint>
#include <string>
#include <vector>

#include "rfdna/cgan.hpp"
#include "rfdna/channel.hpp"
#include "rfdna/nn/graph.hpp"
#include "rfdna/nn/train.hpp"
#include "rfdna/waveform.hpp"

namespace rfdna {

struct LossWeights {
  std::vector<double> lambda_k;  // one per decoder head, all > 0
  double lambda_c = 1.0;         // classifier weight, >= 0 (0 freezes the head)

  void validate() const;
};

// lambda_k = 2^(L - k + 1), lambda_c = 2^L
LossWeights o_weights(int L);

struct PathTarget {
  int k = 1;                 // 1-based path index
  nn::Tensor<float> target;  // (1, 4, n), normalized with the shared stats
};

// Per-path reconstruction targets alpha_k * x[n - tau_k], truncated/padded
// to x's length and normalized with the shared Min-Max statistics.
std::vector<PathTarget> make_path_targets(const ComplexSignal& x, const TapDelayLine& h,
                                          const RowStats& stats);

struct CompositeParts {
  double total = 0.0;
  std::vector<double> mse;  // raw per-head MSE
  double cce = 0.0;         // raw batch-mean cross entropy
};

// total = sum_k lambda_k * mse_k + f * lambda_c * cce, where f = L when the
// classifier term is counted once per path (the literal composite) and 1
// otherwise. Raw components are returned for logging.
CompositeParts composite_loss(const std::vector<nn::Tensor<float>>& recon,
                              const std::vector<nn::Tensor<float>>& targets,
                              const nn::Tensor<float>& probs, const nn::Tensor<float>& onehot,
                              const LossWeights& w, bool classifier_per_path = true);

template <typename T>
struct JcaecnnNet {
  nn::Graph<T> net;
  int in = -1;
  int encoder_out = -1;    // compressed (32, rows, cols/2) representation
  std::vector<int> heads;  // decoder outputs, (1, rows, cols) each
  int prob = -1;           // classifier softmax output (n_labels)
  int rows = 0, cols = 0, n_labels = 0, n_paths = 0;
};

// Encoder: two DenseNet-style blocks (3 conv2d(12, 3x5, same, leaky) layers
// with concatenative skips) separated by a 1x2 maxpool, then a 1x1 conv to
// 32 channels. Decoder heads: deconv(16, 3x5, stride 1x2)+leaky ->
// deconv(1, 3x5)+sigmoid. Classifier: flatten -> dense(128)+relu ->
// dense(n_labels)+softmax.
template <typename T>
JcaecnnNet<T> build_jcaecnn(int n_labels, int n_paths, int rows, int cols);

extern template JcaecnnNet<float> build_jcaecnn<float>(int, int, int, int);
extern template JcaecnnNet<double> build_jcaecnn<double>(int, int, int, int);

struct JcaecnnRecord {
  nn::Tensor<float> input;          // (1, 4, n) received, normalized
  std::vector<PathTarget> targets;  // exactly L entries
  int label = 0;
};

struct JcaecnnModel {
  JcaecnnNet<float> net;
  LossWeights weights;
  bool classifier_per_path = true;
  bool trained = false;
  bool diverged = false;  // NaN abort: parameters are the last-good epoch's
  std::string divergence_note;
  int epochs_run = 0;
  std::vector<double> loss_curve;  // per-epoch mean composite loss
};

// Alternating per-batch scheme: each decoder head's weighted MSE is
// backpropagated and stepped through that head and the shared encoder, then
// the classifier's weighted CCE through the classifier head and the encoder
// (skipped when the effective classifier weight is zero). On a non-finite
// loss, training stops and the previous epoch's parameters are restored.
JcaecnnModel train_jcaecnn(const std::vector<JcaecnnRecord>& dataset, const LossWeights& w,
                           const nn::TrainConfig& cfg, int n_labels,
                           bool classifier_per_path = true);

struct Decomposition {
  std::vector<IqNlTensor> recon;  // L reconstructions
  nn::Tensor<float> probs;        // (1, n_labels)
  int internal_label = 0;         // argmax of probs, ties to lowest
};

// One encoder pass, L decoder passes, one classifier pass.
Decomposition decompose(const JcaecnnModel& model, const IqNlTensor& r_norm);

// CNN_D labels every reconstruction; plurality over those L votes plus the
// internal label, ties to the lowest label index.
int vote_classify(const Classifier<float>& cnn_d, const std::vector<IqNlTensor>& reconstructions,
                  int internal_label);

}  // namespace rfdna
