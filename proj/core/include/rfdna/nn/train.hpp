#pragma once

// Losses and the training configuration shared by every model in the
// project. The *_from_probs helpers pair a forward-pass output with the
// gradient seeded at the pre-activation logits (fused softmax+CCE and
// sigmoid+BCE), which is both cheaper and numerically safer than
// differentiating through the activation.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfdna/nn/graph.hpp"
#include "rfdna/nn/tensor.hpp"

namespace rfdna::nn {

struct TrainConfig {
  OptimConfig optim;
  int batch_size = 256;
  int epochs = 1;
  uint64_t seed = 0;

  void validate() const {
    if (optim.lr <= 0.0) throw std::invalid_argument("train config: learning rate must be > 0");
    if (optim.l2 < 0.0) throw std::invalid_argument("train config: l2_lambda must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  }
};

inline constexpr double kProbFloor = 1e-12;

// mean over every element (batch included)
template <typename T>
double loss_mse(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape != target.shape) {
    throw std::invalid_argument("mse: shape mismatch " + shape_str(pred.shape) + " vs " +
                                shape_str(target.shape));
  }
  double acc = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(pred.data.size());
}

// MSE and its gradient w.r.t. pred, both scaled by `weight`
template <typename T>
double mse_with_grad(const Tensor<T>& pred, const Tensor<T>& target, double weight,
                     Tensor<T>& grad) {
  if (pred.shape != target.shape) {
    throw std::invalid_argument("mse: shape mismatch " + shape_str(pred.shape) + " vs " +
                                shape_str(target.shape));
  }
  grad.shape = pred.shape;
  grad.data.resize(pred.data.size());
  const double inv = 1.0 / static_cast<double>(pred.data.size());
  double acc = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    acc += d * d;
    grad.data[i] = static_cast<T>(weight * 2.0 * d * inv);
  }
  return weight * acc * inv;
}

// categorical cross entropy against explicit one-hot rows, batch-averaged
template <typename T>
double loss_cce(const Tensor<T>& pred, const Tensor<T>& onehot) {
  if (pred.shape != onehot.shape || pred.shape.size() != 2) {
    throw std::invalid_argument("cce: expected matching (batch, classes) tensors, got " +
                                shape_str(pred.shape) + " vs " + shape_str(onehot.shape));
  }
  const int B = pred.shape[0], N = pred.shape[1];
  double acc = 0.0;
  for (int b = 0; b < B; ++b) {
    int hits = 0;
    for (int c = 0; c < N; ++c) {
      const double y = static_cast<double>(onehot.data[static_cast<size_t>(b) * N + c]);
      if (std::abs(y - 1.0) < 1e-9) {
        ++hits;
        const double p =
            std::max(static_cast<double>(pred.data[static_cast<size_t>(b) * N + c]), kProbFloor);
        acc -= std::log(p);
      } else if (std::abs(y) > 1e-9) {
        throw std::invalid_argument("cce: row " + std::to_string(b) + " is not one-hot");
      }
    }
    if (hits != 1) throw std::invalid_argument("cce: row " + std::to_string(b) + " is not one-hot");
  }
  return acc / static_cast<double>(B);
}

// batch-averaged CCE from softmax outputs + integer labels; gradient at the
// softmax *logits* is (p - y)/B, scaled by `weight`
template <typename T>
double cce_with_logit_grad(const Tensor<T>& probs, const std::vector<int>& labels, double weight,
                           Tensor<T>& grad_at_logits) {
  if (probs.shape.size() != 2 || static_cast<size_t>(probs.shape[0]) != labels.size()) {
    throw std::invalid_argument("cce: probs " + shape_str(probs.shape) + " vs " +
                                std::to_string(labels.size()) + " labels");
  }
  const int B = probs.shape[0], N = probs.shape[1];
  grad_at_logits.shape = probs.shape;
  grad_at_logits.data.resize(probs.data.size());
  const double invb = 1.0 / static_cast<double>(B);
  double acc = 0.0;
  for (int b = 0; b < B; ++b) {
    const int y = labels[static_cast<size_t>(b)];
    if (y < 0 || y >= N) throw std::invalid_argument("cce: label out of range");
    for (int c = 0; c < N; ++c) {
      const size_t i = static_cast<size_t>(b) * N + c;
      const double p = static_cast<double>(probs.data[i]);
      grad_at_logits.data[i] = static_cast<T>(weight * (p - (c == y ? 1.0 : 0.0)) * invb);
      if (c == y) acc -= std::log(std::max(p, kProbFloor));
    }
  }
  return weight * acc * invb;
}

// batch-averaged binary cross entropy from sigmoid outputs against targets
// in [0,1]; gradient at the sigmoid logits is (p - t)/B
template <typename T>
double bce_with_logit_grad(const Tensor<T>& probs, const std::vector<double>& targets,
                           Tensor<T>& grad_at_logits) {
  const size_t total = probs.data.size();
  if (total != targets.size() || probs.shape.empty()) {
    throw std::invalid_argument("bce: output count " + std::to_string(total) + " vs " +
                                std::to_string(targets.size()) + " targets");
  }
  const int B = probs.shape[0];
  grad_at_logits.shape = probs.shape;
  grad_at_logits.data.resize(total);
  const double invb = 1.0 / static_cast<double>(B);
  double acc = 0.0;
  for (size_t i = 0; i < total; ++i) {
    const double p = static_cast<double>(probs.data[i]);
    const double t = targets[i];
    acc -= t * std::log(std::max(p, kProbFloor)) +
           (1.0 - t) * std::log(std::max(1.0 - p, kProbFloor));
    grad_at_logits.data[i] = static_cast<T>((p - t) * invb);
  }
  return acc * invb;
}

// argmax of a (1, N) probability row; ties go to the lowest class index
template <typename T>
int argmax_label(const Tensor<T>& probs) {
  if (probs.data.empty()) throw std::invalid_argument("argmax: empty tensor");
  int best = 0;
  const size_t n = probs.data.size();
  for (size_t i = 1; i < n; ++i) {
    if (probs.data[i] > probs.data[static_cast<size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace rfdna::nn
