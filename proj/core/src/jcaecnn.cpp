#include "rfdna/jcaecnn.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rfdna {

void LossWeights::validate() const {
  if (lambda_k.empty()) throw std::invalid_argument("loss weights: no decoder weights");
  for (size_t k = 0; k < lambda_k.size(); ++k) {
    if (!(lambda_k[k] > 0.0)) {
      throw std::invalid_argument("loss weights: lambda_" + std::to_string(k + 1) +
                                  " must be > 0");
    }
  }
  if (lambda_c < 0.0) throw std::invalid_argument("loss weights: lambda_c must be >= 0");
}

LossWeights o_weights(int L) {
  if (L < 1) throw std::invalid_argument("o_weights: path count must be >= 1");
  LossWeights w;
  w.lambda_k.resize(static_cast<size_t>(L));
  for (int k = 1; k <= L; ++k) {
    w.lambda_k[static_cast<size_t>(k - 1)] = std::pow(2.0, static_cast<double>(L - k + 1));
  }
  w.lambda_c = std::pow(2.0, static_cast<double>(L));
  return w;
}

std::vector<PathTarget> make_path_targets(const ComplexSignal& x, const TapDelayLine& h,
                                          const RowStats& stats) {
  const size_t n = x.samples.size();
  std::vector<PathTarget> out;
  out.reserve(h.coeffs.size());
  for (size_t k = 0; k < h.coeffs.size(); ++k) {
    ComplexSignal copy;
    copy.sample_rate_hz = x.sample_rate_hz;
    copy.samples.assign(n, cplx{0.0, 0.0});
    const int tau = h.delays[k];
    for (size_t m = static_cast<size_t>(tau); m < n; ++m) {
      copy.samples[m] = h.coeffs[k] * x.samples[m - static_cast<size_t>(tau)];
    }
    PathTarget t;
    t.k = static_cast<int>(k) + 1;
    t.target = iqnl_to_tensor(minmax_normalize(to_iqnl(copy), stats));
    out.push_back(std::move(t));
  }
  return out;
}

CompositeParts composite_loss(const std::vector<nn::Tensor<float>>& recon,
                              const std::vector<nn::Tensor<float>>& targets,
                              const nn::Tensor<float>& probs, const nn::Tensor<float>& onehot,
                              const LossWeights& w, bool classifier_per_path) {
  w.validate();
  if (recon.size() != targets.size() || recon.size() != w.lambda_k.size()) {
    throw std::invalid_argument("composite loss: got " + std::to_string(recon.size()) +
                                " reconstructions, " + std::to_string(targets.size()) +
                                " targets, " + std::to_string(w.lambda_k.size()) + " weights");
  }
  CompositeParts parts;
  parts.mse.resize(recon.size());
  for (size_t k = 0; k < recon.size(); ++k) {
    parts.mse[k] = nn::loss_mse(recon[k], targets[k]);
    parts.total += w.lambda_k[k] * parts.mse[k];
  }
  parts.cce = nn::loss_cce(probs, onehot);
  const double f = classifier_per_path ? static_cast<double>(recon.size()) : 1.0;
  parts.total += f * w.lambda_c * parts.cce;
  return parts;
}

template <typename T>
JcaecnnNet<T> build_jcaecnn(int n_labels, int n_paths, int rows, int cols) {
  if (n_labels < 2) throw std::invalid_argument("jcaecnn: need at least 2 labels");
  if (n_paths < 1) throw std::invalid_argument("jcaecnn: need at least 1 path");
  if (rows < 1 || cols < 2 || cols % 2 != 0) {
    throw std::invalid_argument("jcaecnn: plane must be rows x cols with even cols");
  }
  JcaecnnNet<T> m;
  m.rows = rows;
  m.cols = cols;
  m.n_labels = n_labels;
  m.n_paths = n_paths;
  auto& g = m.net;
  m.in = g.input({1, rows, cols}, "data");

  // densely connected block: 3 convs, each seeing the block input and every
  // earlier conv output
  auto dense_block = [&](int in, const std::string& tag) {
    std::vector<int> feeds{in};
    for (int c = 0; c < 3; ++c) {
      const int src = feeds.size() == 1 ? feeds[0] : g.concat(feeds, tag + "_cat" + std::to_string(c));
      feeds.push_back(
          g.conv2d(src, 12, 3, 5, nn::Act::leaky_relu, 1, 1, tag + "_conv" + std::to_string(c)));
    }
    return g.concat(feeds, tag + "_out");
  };

  const int b1 = dense_block(m.in, "enc1");
  const int pool = g.maxpool2d(b1, 1, 2, "enc_pool");
  const int b2 = dense_block(pool, "enc2");
  m.encoder_out = g.conv2d(b2, 32, 1, 1, nn::Act::leaky_relu, 1, 1, "enc_out");

  for (int k = 1; k <= n_paths; ++k) {
    const std::string tag = "dec" + std::to_string(k);
    const int d1 = g.deconv2d(m.encoder_out, 16, 3, 5, nn::Act::leaky_relu, 1, 2, tag + "_up");
    m.heads.push_back(g.deconv2d(d1, 1, 3, 5, nn::Act::sigmoid, 1, 1, tag + "_out"));
  }

  const int fl = g.flatten(m.encoder_out, "cls_flat");
  const int h = g.dense(fl, 128, nn::Act::relu, "cls_hidden");
  m.prob = g.dense(h, n_labels, nn::Act::softmax, "cls_prob");
  return m;
}

template JcaecnnNet<float> build_jcaecnn<float>(int, int, int, int);
template JcaecnnNet<double> build_jcaecnn<double>(int, int, int, int);

namespace {

struct BatchBuffers {
  nn::Tensor<float> input;
  std::vector<nn::Tensor<float>> targets;
  std::vector<int> labels;
};

void stage_batch(const std::vector<JcaecnnRecord>& data, const std::vector<size_t>& idx,
                 size_t start, size_t count, int n_paths, BatchBuffers& buf) {
  const auto& s0 = data[idx[start]].input.shape;
  const size_t per = data[idx[start]].input.data.size();
  buf.input.shape = {static_cast<int>(count), s0[0], s0[1], s0[2]};
  buf.input.data.resize(count * per);
  buf.targets.resize(static_cast<size_t>(n_paths));
  for (int k = 0; k < n_paths; ++k) {
    buf.targets[static_cast<size_t>(k)].shape = buf.input.shape;
    buf.targets[static_cast<size_t>(k)].data.resize(count * per);
  }
  buf.labels.resize(count);
  for (size_t b = 0; b < count; ++b) {
    const JcaecnnRecord& rec = data[idx[start + b]];
    std::copy(rec.input.data.begin(), rec.input.data.end(), buf.input.data.begin() + b * per);
    for (int k = 0; k < n_paths; ++k) {
      const auto& t = rec.targets[static_cast<size_t>(k)].target;
      std::copy(t.data.begin(), t.data.end(),
                buf.targets[static_cast<size_t>(k)].data.begin() + b * per);
    }
    buf.labels[b] = rec.label;
  }
}

}  // namespace

JcaecnnModel train_jcaecnn(const std::vector<JcaecnnRecord>& dataset, const LossWeights& w,
                           const nn::TrainConfig& cfg, int n_labels, bool classifier_per_path) {
  w.validate();
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("jcaecnn training: data set is empty");
  const int L = static_cast<int>(w.lambda_k.size());
  const auto& shape0 = dataset[0].input.shape;
  if (shape0.size() != 3 || shape0[0] != 1) {
    throw std::invalid_argument("jcaecnn training: inputs must be (1, rows, cols)");
  }
  for (size_t i = 0; i < dataset.size(); ++i) {
    const JcaecnnRecord& rec = dataset[i];
    if (rec.input.shape != shape0) {
      throw std::invalid_argument("jcaecnn training: record " + std::to_string(i) +
                                  " shape mismatch");
    }
    if (static_cast<int>(rec.targets.size()) != L) {
      throw std::invalid_argument("jcaecnn training: record " + std::to_string(i) + " has " +
                                  std::to_string(rec.targets.size()) + " targets, expected " +
                                  std::to_string(L));
    }
    if (rec.label < 0 || rec.label >= n_labels) {
      throw std::invalid_argument("jcaecnn training: record " + std::to_string(i) +
                                  " label out of range");
    }
  }

  JcaecnnModel model;
  model.net = build_jcaecnn<float>(n_labels, L, shape0[1], shape0[2]);
  model.weights = w;
  model.classifier_per_path = classifier_per_path;
  auto& net = model.net.net;
  net.init_params(derive_seed(cfg.seed, 0xb1));
  Rng order(derive_seed(cfg.seed, 0xb2));

  auto ws = net.make_workspace();
  ws.training = true;
  std::vector<size_t> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  const size_t bs = static_cast<size_t>(cfg.batch_size);
  const int cls_logit = net.pre_activation(model.net.prob);
  const double wc =
      (classifier_per_path ? static_cast<double>(L) : 1.0) * w.lambda_c;

  auto checkpoint = net.params();  // last-good (initialization to start)
  BatchBuffers buf;
  nn::Tensor<float> grad;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order.shuffle(idx);
    double ep_loss = 0.0;
    int64_t seen = 0;
    bool bad = false;

    for (size_t start = 0; start < idx.size() && !bad; start += bs) {
      const size_t count = std::min(bs, idx.size() - start);
      stage_batch(dataset, idx, start, count, L, buf);
      double batch_loss = 0.0;

      for (int k = 0; k < L && !bad; ++k) {
        ws.reset();
        ws.set_input(model.net.in, buf.input);
        const auto& recon = net.forward(ws, model.net.heads[static_cast<size_t>(k)]);
        const double lk = nn::mse_with_grad(recon, buf.targets[static_cast<size_t>(k)],
                                            w.lambda_k[static_cast<size_t>(k)], grad);
        if (!std::isfinite(lk)) {
          bad = true;
          model.divergence_note = "non-finite decoder-" + std::to_string(k + 1) +
                                  " loss at epoch " + std::to_string(epoch);
          break;
        }
        net.backward(ws, model.net.heads[static_cast<size_t>(k)], grad);
        net.step(cfg.optim);
        batch_loss += lk;
      }

      if (!bad) {
        ws.reset();
        ws.set_input(model.net.in, buf.input);
        const auto& probs = net.forward(ws, model.net.prob);
        if (wc > 0.0) {
          const double lc = nn::cce_with_logit_grad(probs, buf.labels, wc, grad);
          if (!std::isfinite(lc)) {
            bad = true;
            model.divergence_note = "non-finite classifier loss at epoch " + std::to_string(epoch);
          } else {
            net.backward(ws, cls_logit, grad);
            net.step(cfg.optim);
            batch_loss += lc;
          }
        }
      }

      if (!bad) {
        ep_loss += batch_loss * static_cast<double>(count);
        seen += static_cast<int64_t>(count);
      }
    }

    if (bad) {
      net.params() = checkpoint;
      model.diverged = true;
      break;
    }
    checkpoint = net.params();
    model.loss_curve.push_back(ep_loss / static_cast<double>(seen));
    model.epochs_run = epoch + 1;
  }

  model.trained = true;
  return model;
}

Decomposition decompose(const JcaecnnModel& model, const IqNlTensor& r_norm) {
  if (!model.trained) throw std::runtime_error("decompose: model is untrained");
  if (r_norm.n != model.net.cols) {
    throw std::invalid_argument("decompose: tensor length " + std::to_string(r_norm.n) +
                                " does not match model (" + std::to_string(model.net.cols) + ")");
  }
  auto ws = model.net.net.make_workspace();
  ws.set_input(model.net.in, nn::with_batch_dim(iqnl_to_tensor(r_norm)));

  Decomposition d;
  d.recon.reserve(model.net.heads.size());
  for (const int head : model.net.heads) {
    d.recon.push_back(tensor_to_iqnl(model.net.net.forward(ws, head)));
  }
  const auto& p = model.net.net.forward(ws, model.net.prob);
  d.probs.shape = {1, model.net.n_labels};
  d.probs.data = p.data;
  d.internal_label = nn::argmax_label(d.probs);
  return d;
}

int vote_classify(const Classifier<float>& cnn_d, const std::vector<IqNlTensor>& reconstructions,
                  int internal_label) {
  if (reconstructions.empty()) throw std::invalid_argument("vote: no reconstructions");
  if (internal_label < 0 || internal_label >= cnn_d.n_labels) {
    throw std::invalid_argument("vote: internal label out of range");
  }
  std::vector<int> tally(static_cast<size_t>(cnn_d.n_labels), 0);
  for (const IqNlTensor& r : reconstructions) {
    tally[static_cast<size_t>(nn::argmax_label(classify_probs(cnn_d, r)))]++;
  }
  tally[static_cast<size_t>(internal_label)]++;
  int best = 0;
  for (int c = 1; c < cnn_d.n_labels; ++c) {
    if (tally[static_cast<size_t>(c)] > tally[static_cast<size_t>(best)]) best = c;
  }
  return best;
}

}  // namespace rfdna
