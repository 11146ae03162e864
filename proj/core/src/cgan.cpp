#include "rfdna/cgan.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace rfdna {

void CganConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("cgan config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("cgan config: batch_size must be >= 1");
  if (d_steps < 1) throw std::invalid_argument("cgan config: discriminator steps must be >= 1");
  if (g_optim.lr <= 0.0 || d_optim.lr <= 0.0) {
    throw std::invalid_argument("cgan config: learning rates must be > 0");
  }
  if (plateau_window < 0) throw std::invalid_argument("cgan config: plateau_window must be >= 0");
}

namespace {

void check_geometry(int n_labels, int rows, int cols, int embed_dim) {
  if (n_labels < 2) throw std::invalid_argument("conditional net: need at least 2 labels");
  if (rows < 1 || cols < 2 || cols % 2 != 0) {
    throw std::invalid_argument("conditional net: plane must be rows x cols with even cols");
  }
  if (embed_dim < 1) throw std::invalid_argument("conditional net: embedding dim must be >= 1");
}

// shared conditioning head + conv trunk: returns the id after the second conv
template <typename T>
int cond_trunk(CondNet<T>& m, nn::Act act) {
  auto& g = m.net;
  m.in = g.input({1, m.rows, m.cols}, "data");
  m.labels = g.input_labels("labels");
  m.embed = g.embedding(m.labels, m.n_labels, m.embed_dim, "embed");
  const int pd = g.dense(m.embed, m.rows * m.cols, nn::Act::linear, "embed_dense");
  m.label_plane = g.reshape(pd, {1, m.rows, m.cols}, "label_plane");
  const int cat = g.concat({m.in, m.label_plane}, "cat");
  const int c1 = g.conv2d(cat, 16, 3, 7, act, 1, 1, "conv1");
  const int p1 = g.maxpool2d(c1, 1, 2, "pool1");
  return g.conv2d(p1, 32, 3, 5, act, 1, 1, "conv2");
}

}  // namespace

template <typename T>
CondNet<T> build_generator(int n_labels, int rows, int cols, int embed_dim) {
  check_geometry(n_labels, rows, cols, embed_dim);
  CondNet<T> m;
  m.rows = rows;
  m.cols = cols;
  m.n_labels = n_labels;
  m.embed_dim = embed_dim;
  const int enc = cond_trunk(m, nn::Act::leaky_relu);
  auto& g = m.net;
  const int d1 = g.deconv2d(enc, 16, 3, 5, nn::Act::leaky_relu, 1, 1, "dec1");
  m.out = g.deconv2d(d1, 2, 3, 7, nn::Act::sigmoid, 1, 2, "out");
  return m;
}

template <typename T>
CondNet<T> build_discriminator(int n_labels, int rows, int cols, int embed_dim) {
  check_geometry(n_labels, rows, cols, embed_dim);
  CondNet<T> m;
  m.rows = rows;
  m.cols = cols;
  m.n_labels = n_labels;
  m.embed_dim = embed_dim;
  const int enc = cond_trunk(m, nn::Act::leaky_relu);
  auto& g = m.net;
  const int fl = g.flatten(enc, "flat");
  const int h = g.dense(fl, 128, nn::Act::leaky_relu, "hidden");
  m.out = g.dense(h, 1, nn::Act::sigmoid, "out");
  return m;
}

template <typename T>
Classifier<T> build_classifier(int n_labels, int rows, int cols) {
  if (n_labels < 2) throw std::invalid_argument("classifier: need at least 2 labels");
  if (rows < 1 || cols < 2 || cols % 2 != 0) {
    throw std::invalid_argument("classifier: plane must be rows x cols with even cols");
  }
  Classifier<T> m;
  m.rows = rows;
  m.cols = cols;
  m.n_labels = n_labels;
  auto& g = m.net;
  m.in = g.input({1, rows, cols}, "data");
  const int c1 = g.conv2d(m.in, 16, 3, 7, nn::Act::relu, 1, 1, "conv1");
  const int p1 = g.maxpool2d(c1, 1, 2, "pool1");
  const int c2 = g.conv2d(p1, 32, 3, 5, nn::Act::relu, 1, 1, "conv2");
  const int fl = g.flatten(c2, "flat");
  const int h = g.dense(fl, 128, nn::Act::relu, "hidden");
  m.prob = g.dense(h, n_labels, nn::Act::softmax, "prob");
  return m;
}

template CondNet<float> build_generator<float>(int, int, int, int);
template CondNet<double> build_generator<double>(int, int, int, int);
template CondNet<float> build_discriminator<float>(int, int, int, int);
template CondNet<double> build_discriminator<double>(int, int, int, int);
template Classifier<float> build_classifier<float>(int, int, int);
template Classifier<double> build_classifier<double>(int, int, int);

Cgan build_cgan(int n_labels, int rows, int cols, int embed_dim) {
  Cgan m;
  m.g = build_generator<float>(n_labels, rows, cols, embed_dim);
  m.d = build_discriminator<float>(n_labels, rows, cols, embed_dim);
  return m;
}

LabelPlane embed_label(const CondNet<float>& net, int y) {
  if (y < 0 || y >= net.n_labels) {
    throw std::invalid_argument("embed_label: label " + std::to_string(y) + " out of range [0, " +
                                std::to_string(net.n_labels) + ")");
  }
  auto ws = net.net.make_workspace();
  ws.set_labels(net.labels, {y});
  const auto& plane = net.net.forward(ws, net.label_plane);
  LabelPlane out;
  out.label = y;
  const auto& emb = ws.out[static_cast<size_t>(net.embed)];
  out.embedding.assign(emb.data.begin(), emb.data.end());
  out.plane = nn::Tensor<float>({1, net.rows, net.cols});
  std::copy(plane.data.begin(), plane.data.end(), out.plane.data.begin());
  return out;
}

namespace {

void validate_set(const std::vector<LabeledPreamble>& set, int rows, int cols, int n_labels,
                  const char* what) {
  const std::vector<int> want{1, rows, cols};
  for (size_t i = 0; i < set.size(); ++i) {
    if (set[i].data.shape != want) {
      throw std::invalid_argument(std::string(what) + " record " + std::to_string(i) +
                                  ": shape " + nn::shape_str(set[i].data.shape) + ", expected " +
                                  nn::shape_str(want));
    }
    if (set[i].label < 0 || set[i].label >= n_labels) {
      throw std::invalid_argument(std::string(what) + " record " + std::to_string(i) +
                                  ": label out of range");
    }
  }
}

nn::Tensor<float> stack_batch(const std::vector<LabeledPreamble>& set,
                              const std::vector<size_t>& idx, size_t start, size_t count,
                              std::vector<int>& labels) {
  const auto& s0 = set[idx[start]].data.shape;
  nn::Tensor<float> out({static_cast<int>(count), s0[0], s0[1], s0[2]});
  const size_t per = set[idx[start]].data.data.size();
  labels.resize(count);
  for (size_t b = 0; b < count; ++b) {
    const LabeledPreamble& rec = set[idx[start + b]];
    std::copy(rec.data.data.begin(), rec.data.data.end(), out.data.begin() + b * per);
    labels[b] = rec.label;
  }
  return out;
}

// first channel of a (B, 2, R, C) tensor -> (B, 1, R, C)
nn::Tensor<float> first_channel(const nn::Tensor<float>& x) {
  const int B = x.shape[0], R = x.shape[2], C = x.shape[3];
  nn::Tensor<float> out({B, 1, R, C});
  const size_t plane = static_cast<size_t>(R) * C;
  for (int b = 0; b < B; ++b) {
    std::copy(x.data.begin() + (static_cast<size_t>(b) * x.shape[1]) * plane,
              x.data.begin() + (static_cast<size_t>(b) * x.shape[1]) * plane + plane,
              out.data.begin() + static_cast<size_t>(b) * plane);
  }
  return out;
}

bool plateaued(const std::vector<double>& curve, int window, double tol) {
  if (window <= 0 || static_cast<int>(curve.size()) < window) return false;
  double lo = curve[curve.size() - static_cast<size_t>(window)];
  double hi = lo;
  for (size_t i = curve.size() - static_cast<size_t>(window); i < curve.size(); ++i) {
    lo = std::min(lo, curve[i]);
    hi = std::max(hi, curve[i]);
  }
  return hi - lo < tol;
}

}  // namespace

CganCurves train_cgan(Cgan& model, const std::vector<LabeledPreamble>& multipath_set,
                      const std::vector<LabeledPreamble>& clean_set, const CganConfig& cfg) {
  cfg.validate();
  if (multipath_set.empty() || clean_set.empty()) {
    throw std::invalid_argument("cgan training: both data sets must be non-empty");
  }
  auto& G = model.g;
  auto& D = model.d;
  validate_set(multipath_set, G.rows, G.cols, G.n_labels, "multipath set");
  validate_set(clean_set, G.rows, G.cols, G.n_labels, "clean set");

  G.net.init_params(derive_seed(cfg.seed, 0xa1));
  D.net.init_params(derive_seed(cfg.seed, 0xa2));
  Rng order(derive_seed(cfg.seed, 0xa3));

  auto ws_g = G.net.make_workspace();
  auto ws_d = D.net.make_workspace();
  ws_g.training = true;
  ws_d.training = true;

  std::vector<size_t> mp_idx(multipath_set.size());
  std::iota(mp_idx.begin(), mp_idx.end(), size_t{0});
  std::vector<size_t> cl_idx(clean_set.size());
  std::iota(cl_idx.begin(), cl_idx.end(), size_t{0});
  size_t cl_pos = cl_idx.size();  // forces a shuffle on first use

  auto next_clean = [&](size_t count, std::vector<size_t>& out) {
    out.clear();
    for (size_t i = 0; i < count; ++i) {
      if (cl_pos >= cl_idx.size()) {
        order.shuffle(cl_idx);
        cl_pos = 0;
      }
      out.push_back(cl_idx[cl_pos++]);
    }
  };

  const size_t bs = static_cast<size_t>(cfg.batch_size);
  const int d_logit = D.net.pre_activation(D.out);

  CganCurves curves;
  nn::Tensor<float> dgrad, gseed;
  std::vector<int> mp_labels, cl_labels;
  std::vector<size_t> real_pick;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order.shuffle(mp_idx);
    double ep_d = 0.0, ep_g = 0.0, ep_real = 0.0, ep_fake = 0.0;
    int64_t n_real = 0, n_fake = 0;
    int n_batches = 0;

    for (size_t start = 0; start < mp_idx.size(); start += bs) {
      const size_t count = std::min(bs, mp_idx.size() - start);
      const int B = static_cast<int>(count);

      // generator forward for this minibatch (reused by every D step below;
      // G's parameters do not change until its own update)
      ws_g.reset();
      ws_g.set_input(G.in, stack_batch(multipath_set, mp_idx, start, count, mp_labels));
      ws_g.set_labels(G.labels, mp_labels);
      const nn::Tensor<float> fake = first_channel(G.net.forward(ws_g, G.out));

      double batch_d = 0.0;
      for (int s = 0; s < cfg.d_steps; ++s) {
        next_clean(count, real_pick);
        std::vector<int> labels;
        nn::Tensor<float> real({B, 1, G.rows, G.cols});
        labels.resize(count);
        for (size_t b = 0; b < count; ++b) {
          const LabeledPreamble& rec = clean_set[real_pick[b]];
          std::copy(rec.data.data.begin(), rec.data.data.end(),
                    real.data.begin() + b * rec.data.data.size());
          labels[b] = rec.label;
        }

        ws_d.reset();
        ws_d.set_input(D.in, std::move(real));
        ws_d.set_labels(D.labels, labels);
        const auto& p_real = D.net.forward(ws_d, D.out);
        for (const float v : p_real.data) ep_real += v;
        n_real += B;
        const double l_real =
            nn::bce_with_logit_grad(p_real, std::vector<double>(count, 1.0), dgrad);
        D.net.backward(ws_d, d_logit, dgrad);

        ws_d.reset();
        ws_d.set_input(D.in, fake);
        ws_d.set_labels(D.labels, mp_labels);
        const auto& p_fake = D.net.forward(ws_d, D.out);
        for (const float v : p_fake.data) ep_fake += v;
        n_fake += B;
        const double l_fake =
            nn::bce_with_logit_grad(p_fake, std::vector<double>(count, 0.0), dgrad);
        D.net.backward(ws_d, d_logit, dgrad);

        const double d_loss = l_real + l_fake;
        if (!std::isfinite(d_loss)) {
          throw std::runtime_error("cgan training diverged: non-finite discriminator loss at epoch " +
                                   std::to_string(epoch) + ", batch " + std::to_string(n_batches));
        }
        batch_d += d_loss;
        D.net.step(cfg.d_optim);
      }

      // non-saturating generator update through the (frozen) discriminator
      ws_d.reset();
      ws_d.set_input(D.in, fake);
      ws_d.set_labels(D.labels, mp_labels);
      const auto& p_g = D.net.forward(ws_d, D.out);
      const double g_loss = nn::bce_with_logit_grad(p_g, std::vector<double>(count, 1.0), dgrad);
      if (!std::isfinite(g_loss)) {
        throw std::runtime_error("cgan training diverged: non-finite generator loss at epoch " +
                                 std::to_string(epoch) + ", batch " + std::to_string(n_batches));
      }
      D.net.backward(ws_d, d_logit, dgrad);
      const nn::Tensor<float>& d_in_grad = ws_d.grad[static_cast<size_t>(D.in)];
      D.net.zero_grad();  // discard gradients accumulated for the G update

      // seed dLoss/d(G out): adversarial gradient on the data channel only
      gseed.shape = {B, 2, G.rows, G.cols};
      gseed.data.assign(static_cast<size_t>(B) * 2 * G.rows * G.cols, 0.0f);
      const size_t plane = static_cast<size_t>(G.rows) * G.cols;
      for (int b = 0; b < B; ++b) {
        std::copy(d_in_grad.data.begin() + static_cast<size_t>(b) * plane,
                  d_in_grad.data.begin() + static_cast<size_t>(b + 1) * plane,
                  gseed.data.begin() + static_cast<size_t>(b) * 2 * plane);
      }
      G.net.backward(ws_g, G.out, gseed);
      G.net.step(cfg.g_optim);

      ep_d += batch_d / cfg.d_steps;
      ep_g += g_loss;
      ++n_batches;
    }

    curves.d_loss.push_back(ep_d / n_batches);
    curves.g_loss.push_back(ep_g / n_batches);
    curves.d_out_real_mean.push_back(ep_real / static_cast<double>(n_real));
    curves.d_out_fake_mean.push_back(ep_fake / static_cast<double>(n_fake));
    curves.epochs_run = epoch + 1;

    if (plateaued(curves.d_loss, cfg.plateau_window, cfg.plateau_tol) &&
        plateaued(curves.g_loss, cfg.plateau_window, cfg.plateau_tol)) {
      curves.early_stopped = true;
      break;
    }
  }

  model.trained = true;

  if (!cfg.curves_path.empty()) {
    std::ofstream os(cfg.curves_path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write curves to '" + cfg.curves_path + "'");
    os << "epoch,d_loss,g_loss,d_out_real_mean,d_out_fake_mean\n";
    char line[160];
    for (size_t e = 0; e < curves.d_loss.size(); ++e) {
      std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g,%.9g\n", e, curves.d_loss[e],
                    curves.g_loss[e], curves.d_out_real_mean[e], curves.d_out_fake_mean[e]);
      os << line;
    }
  }
  return curves;
}

nn::Tensor<float> iqnl_to_tensor(const IqNlTensor& t) {
  nn::Tensor<float> out({1, 4, t.n});
  for (size_t i = 0; i < t.rows.size(); ++i) out.data[i] = static_cast<float>(t.rows[i]);
  return out;
}

IqNlTensor tensor_to_iqnl(const nn::Tensor<float>& x, int sample) {
  if (x.shape.size() < 3) {
    throw std::invalid_argument("tensor_to_iqnl: expected (…,1,4,n), got " + nn::shape_str(x.shape));
  }
  const int C = x.shape[x.shape.size() - 3];
  const int R = x.shape[x.shape.size() - 2];
  const int n = x.shape[x.shape.size() - 1];
  if (C != 1 || R != 4) {
    throw std::invalid_argument("tensor_to_iqnl: expected a (1,4,n) plane, got " +
                                nn::shape_str(x.shape));
  }
  IqNlTensor t;
  t.n = n;
  t.rows.resize(static_cast<size_t>(4) * n);
  const size_t per = static_cast<size_t>(4) * n;
  for (size_t i = 0; i < per; ++i) {
    t.rows[i] = static_cast<double>(x.data[static_cast<size_t>(sample) * per + i]);
  }
  return t;
}

IqNlTensor cgan_equalize(const Cgan& model, const IqNlTensor& r_norm, int y) {
  if (!model.trained) throw std::runtime_error("cgan_equalize: generator is untrained");
  if (y < 0 || y >= model.g.n_labels) {
    throw std::invalid_argument("cgan_equalize: label out of range");
  }
  if (model.g.rows != 4) {
    throw std::invalid_argument("cgan_equalize: model plane has " + std::to_string(model.g.rows) +
                                " rows; the 4-row signal representation is required");
  }
  if (r_norm.n != model.g.cols) {
    throw std::invalid_argument("cgan_equalize: tensor length " + std::to_string(r_norm.n) +
                                " does not match model (" + std::to_string(model.g.cols) + ")");
  }
  auto ws = model.g.net.make_workspace();
  ws.set_input(model.g.in, nn::with_batch_dim(iqnl_to_tensor(r_norm)));
  ws.set_labels(model.g.labels, {y});
  const auto& out = model.g.net.forward(ws, model.g.out);  // (1, 2, 4, n)
  model.equalize_calls++;

  IqNlTensor eq;
  eq.n = model.g.cols;
  const size_t per = static_cast<size_t>(4) * eq.n;
  eq.rows.resize(per);
  for (size_t i = 0; i < per; ++i) eq.rows[i] = static_cast<double>(out.data[i]);
  return eq;
}

nn::Tensor<float> classify_probs(const Classifier<float>& cls, const IqNlTensor& t) {
  if (t.n != cls.cols) {
    throw std::invalid_argument("classify: tensor length " + std::to_string(t.n) +
                                " does not match model (" + std::to_string(cls.cols) + ")");
  }
  auto ws = cls.net.make_workspace();
  ws.set_input(cls.in, nn::with_batch_dim(iqnl_to_tensor(t)));
  const auto& p = cls.net.forward(ws, cls.prob);
  nn::Tensor<float> out;
  out.shape = {1, cls.n_labels};
  out.data = p.data;
  return out;
}

int classify_confidence(const Classifier<float>& cnn, const std::vector<IqNlTensor>& equalized_set,
                        std::vector<std::vector<double>>* q_out) {
  if (equalized_set.size() != static_cast<size_t>(cnn.n_labels)) {
    throw std::invalid_argument("classify_confidence: need one tensor per candidate label (" +
                                std::to_string(cnn.n_labels) + "), got " +
                                std::to_string(equalized_set.size()));
  }
  const int K = cnn.n_labels;
  std::vector<std::vector<double>> q(static_cast<size_t>(K), std::vector<double>(K));
  int best_i = 0;
  double best = -1.0;
  for (int i = 0; i < K; ++i) {
    const auto probs = classify_probs(cnn, equalized_set[static_cast<size_t>(i)]);
    for (int j = 0; j < K; ++j) {
      const double v = static_cast<double>(probs.data[static_cast<size_t>(j)]);
      q[static_cast<size_t>(i)][static_cast<size_t>(j)] = v;
      if (v > best) {  // strict: ties keep the lowest (i, j)
        best = v;
        best_i = i;
      }
    }
  }
  if (q_out) *q_out = std::move(q);
  return best_i;
}

GridSearchResult grid_search_train_snr(
    const std::vector<double>& train_snrs, const std::vector<double>& test_snrs,
    const std::function<std::function<double(double)>(double)>& builder) {
  if (train_snrs.empty() || test_snrs.empty()) {
    throw std::invalid_argument("grid search: SNR grids must be non-empty");
  }
  GridSearchResult res;
  res.accuracy.assign(train_snrs.size(), std::vector<double>(test_snrs.size(), 0.0));
  for (size_t r = 0; r < train_snrs.size(); ++r) {
    auto eval = builder(train_snrs[r]);
    for (size_t t = 0; t < test_snrs.size(); ++t) {
      res.accuracy[r][t] = eval(test_snrs[t]);
    }
  }
  res.best_train_index_per_test.assign(test_snrs.size(), 0);
  res.best_train_per_test.assign(test_snrs.size(), 0.0);
  for (size_t t = 0; t < test_snrs.size(); ++t) {
    size_t best = 0;
    for (size_t r = 1; r < train_snrs.size(); ++r) {
      if (res.accuracy[r][t] > res.accuracy[best][t]) best = r;
    }
    res.best_train_index_per_test[t] = static_cast<int>(best);
    res.best_train_per_test[t] = train_snrs[best];
  }
  double best_mean = -1.0;
  for (size_t r = 0; r < train_snrs.size(); ++r) {
    double m = 0.0;
    for (const double a : res.accuracy[r]) m += a;
    m /= static_cast<double>(test_snrs.size());
    if (m > best_mean) {
      best_mean = m;
      res.best_train_index_overall = static_cast<int>(r);
      res.best_train_overall = train_snrs[r];
    }
  }
  return res;
}

std::vector<double> train_classifier(Classifier<float>& cls,
                                     const std::vector<LabeledPreamble>& data,
                                     const nn::TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("classifier training: data set is empty");
  validate_set(data, cls.rows, cls.cols, cls.n_labels, "classifier set");

  cls.net.init_params(derive_seed(cfg.seed, 0xc1));
  Rng order(derive_seed(cfg.seed, 0xc2));
  auto ws = cls.net.make_workspace();
  ws.training = true;

  std::vector<size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  const size_t bs = static_cast<size_t>(cfg.batch_size);
  const int logit = cls.net.pre_activation(cls.prob);

  std::vector<double> curve;
  nn::Tensor<float> grad;
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order.shuffle(idx);
    double ep = 0.0;
    for (size_t start = 0; start < idx.size(); start += bs) {
      const size_t count = std::min(bs, idx.size() - start);
      ws.reset();
      ws.set_input(cls.in, stack_batch(data, idx, start, count, labels));
      const auto& probs = cls.net.forward(ws, cls.prob);
      const double loss = nn::cce_with_logit_grad(probs, labels, 1.0, grad);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("classifier training diverged at epoch " + std::to_string(epoch));
      }
      cls.net.backward(ws, logit, grad);
      cls.net.step(cfg.optim);
      ep += loss * static_cast<double>(count);
    }
    curve.push_back(ep / static_cast<double>(idx.size()));
  }
  return curve;
}

}  // namespace rfdna
