// End-to-end acceptance checks for the fingerprinting workbench. Each
// criterion prints exactly one line:
//
//   CRITERION <k>: PASS — <detail>
//   CRITERION <k>: FAIL — <detail>
//
// and the process exit code is the number of failed criteria. Thresholds are
// fixed here, not tuned at runtime.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rfdna/cgan.hpp"
#include "rfdna/channel.hpp"
#include "rfdna/harness.hpp"
#include "rfdna/jcaecnn.hpp"
#include "rfdna/mmse.hpp"
#include "rfdna/nmestimator.hpp"
#include "rfdna/nn/gradcheck.hpp"
#include "rfdna/nn/train.hpp"
#include "rfdna/waveform.hpp"

namespace fs = std::filesystem;
using namespace rfdna;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

nn::Tensor<double> random_tensor(std::vector<int> shape, Rng& rng) {
  nn::Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

// --- criterion 1: multipath tap statistics ----------------------------------
// 1e5 channel draws; each tap's real and imaginary sample variances must land
// within 3% of the exponential-decay profile (tap_variance is the variance of
// each Gaussian component), and tap means near zero.
Outcome c1_channel_statistics() {
  ChannelConfig cfg;  // L = 5, T_r = 1e-7, T_s = 5e-8
  const int n_draws = 100000;
  Rng rng(12345);
  std::vector<std::vector<cplx>> taps(static_cast<size_t>(cfg.L));
  for (auto& t : taps) t.reserve(n_draws);
  for (int i = 0; i < n_draws; ++i) {
    const TapDelayLine h = draw_tdl(cfg, rng);
    for (int k = 0; k < cfg.L; ++k) taps[static_cast<size_t>(k)].push_back(h.coeffs[static_cast<size_t>(k)]);
  }
  double worst_rel = 0.0;
  double worst_mean = 0.0;
  for (int k = 1; k <= cfg.L; ++k) {
    const double expect = tap_variance(k, cfg.t_sample_s, cfg.t_rms_s);
    double mr = 0.0, mi = 0.0;
    for (const cplx& c : taps[static_cast<size_t>(k - 1)]) {
      mr += c.real();
      mi += c.imag();
    }
    mr /= n_draws;
    mi /= n_draws;
    double vr = 0.0, vi = 0.0;
    for (const cplx& c : taps[static_cast<size_t>(k - 1)]) {
      vr += (c.real() - mr) * (c.real() - mr);
      vi += (c.imag() - mi) * (c.imag() - mi);
    }
    vr /= n_draws - 1;
    vi /= n_draws - 1;
    worst_rel = std::max({worst_rel, std::abs(vr / expect - 1.0), std::abs(vi / expect - 1.0)});
    worst_mean = std::max({worst_mean, std::abs(mr), std::abs(mi)});
  }
  const bool pass = worst_rel < 0.03 && worst_mean < 0.01;
  return {pass, "tap variance worst relative error " + fmt(worst_rel) +
                    " (limit 0.03), worst |mean| " + fmt(worst_mean) + " (limit 0.01), " +
                    std::to_string(n_draws) + " draws"};
}

// --- criterion 2: split-estimator accuracy ----------------------------------
// Coefficient MSE of the simplex channel estimator against the drawn taps:
// noiseless trials must average <= 1e-3, 30 dB trials <= 1e-2.
Outcome c2_estimator_accuracy() {
  const ComplexSignal base = synthesize_preamble(20e6);
  ChannelConfig ccfg;
  const NmOptions opts{};
  const int trials = 100;

  const auto run = [&](bool noiseless) {
    double total = 0.0;
    for (int t = 0; t < trials; ++t) {
      const EmitterProfile p = draw_emitter_profile(t % 4, 900 + t);
      const ComplexSignal x = apply_impairments(base, p);
      Rng rng(5000 + t);
      const TapDelayLine h = draw_tdl(ccfg, rng);
      ComplexSignal r = apply_channel(x, h);
      if (!noiseless) r = add_awgn(r, 30.0, rng);
      const ChannelEstimate est = estimate_channel(r, x, ccfg.L, opts);
      double mse = 0.0;
      for (size_t k = 0; k < h.coeffs.size(); ++k) {
        mse += std::norm(est.coeffs[k] - h.coeffs[k]);
      }
      total += mse / static_cast<double>(h.coeffs.size());
    }
    return total / trials;
  };

  const double clean_mse = run(true);
  const double noisy_mse = run(false);
  const bool pass = clean_mse <= 1e-3 && noisy_mse <= 1e-2;
  return {pass, "coefficient MSE noiseless " + fmt(clean_mse) + " (limit 1e-3), 30 dB " +
                    fmt(noisy_mse) + " (limit 1e-2), " + std::to_string(trials) +
                    " trials each"};
}

// --- criterion 3: regularized equalizer -------------------------------------
// At 30 dB with the true channel, equalization must cut signal MSE to at most
// a tenth of the unequalized error; with near-infinite SNR and an identity
// channel it must return the input.
Outcome c3_equalizer() {
  const ComplexSignal base = synthesize_preamble(20e6);
  ChannelConfig ccfg;
  const int trials = 100;
  double eq_total = 0.0, raw_total = 0.0;
  for (int t = 0; t < trials; ++t) {
    const ComplexSignal x = apply_impairments(base, draw_emitter_profile(t % 4, 300 + t));
    Rng rng(7000 + t);
    const TapDelayLine h = draw_tdl(ccfg, rng);
    const ComplexSignal r = add_awgn(apply_channel(x, h), 30.0, rng);
    const ConvMatrix a = conv_matrix(h, static_cast<int>(x.samples.size()));
    const ComplexSignal xhat = mmse_equalize(r, a, std::pow(10.0, 3.0));
    double eq = 0.0, raw = 0.0;
    for (size_t i = 0; i < x.samples.size(); ++i) {
      eq += std::norm(xhat.samples[i] - x.samples[i]);
      raw += std::norm(r.samples[i] - x.samples[i]);
    }
    eq_total += eq / static_cast<double>(x.samples.size());
    raw_total += raw / static_cast<double>(x.samples.size());
  }
  const double ratio = eq_total / raw_total;

  // identity-channel limit
  TapDelayLine ident;
  ident.coeffs = {cplx{1.0, 0.0}};
  ident.delays = {0};
  const ComplexSignal x0 = apply_impairments(base, draw_emitter_profile(0, 1));
  const ConvMatrix a0 = conv_matrix(ident, static_cast<int>(x0.samples.size()));
  const ComplexSignal same = mmse_equalize(x0, a0, 1e12);
  double ident_err = 0.0, ident_ref = 0.0;
  for (size_t i = 0; i < x0.samples.size(); ++i) {
    ident_err += std::norm(same.samples[i] - x0.samples[i]);
    ident_ref += std::norm(x0.samples[i]);
  }
  const double ident_rel = std::sqrt(ident_err / ident_ref);

  const bool pass = ratio <= 0.1 && ident_rel <= 1e-9;
  return {pass, "equalized/raw MSE ratio " + fmt(ratio) + " (limit 0.1), identity residual " +
                    fmt(ident_rel) + " (limit 1e-9), " + std::to_string(trials) + " trials"};
}

// --- criterion 4: analytic gradients ----------------------------------------
// Central-difference verification on a graph exercising every layer kind and
// on the three production architectures (float64 builds).
Outcome c4_gradients() {
  double worst = 0.0;
  std::string worst_net = "none";
  const auto track = [&](const std::string& name, const nn::GradCheckReport& rep) {
    if (rep.max_rel_err > worst) {
      worst = rep.max_rel_err;
      worst_net = name;
    }
  };

  {  // every layer kind in one graph
    nn::Graph<double> g;
    const int in = g.input({1, 4, 8}, "in");
    const int lab = g.input_labels("lab");
    const int cv = g.conv2d(in, 6, 3, 3, nn::Act::tanh_act, 1, 2, "cv");
    const int emb = g.embedding(lab, 4, 16, "emb");
    const int rs = g.reshape(emb, {1, 4, 4}, "rs");
    const int cat = g.concat({cv, rs}, "cat");
    const int mp = g.maxpool2d(cat, 1, 2, "mp");
    const int c2 = g.conv2d(mp, 4, 3, 3, nn::Act::sigmoid, 1, 1, "c2");
    const int dc = g.deconv2d(c2, 3, 3, 3, nn::Act::tanh_act, 1, 2, "dc");
    const int dr = g.dropout(dc, 0.3, "dr");
    const int fl = g.flatten(dr, "fl");
    const int out = g.dense(fl, 5, nn::Act::softmax, "out");
    g.init_params(11);

    auto ws = g.make_workspace();
    ws.training = true;
    ws.freeze_masks = true;
    Rng rng(21);
    const auto x = random_tensor({2, 1, 4, 8}, rng);
    const std::vector<int> labels{2, 0};
    const auto stage = [&] {
      ws.reset();
      ws.set_input(in, x);
      ws.set_labels(lab, labels);
    };
    const auto loss_fn = [&]() -> double {
      stage();
      const auto& y = g.forward(ws, out);
      double acc = 0.0;
      for (double v : y.data) acc += 0.5 * v * v;
      return acc;
    };
    const auto grad_fn = [&] {
      g.zero_grad();
      stage();
      const auto& y = g.forward(ws, out);
      g.backward(ws, out, y);
    };
    track("all-kinds", gradcheck(g, loss_fn, grad_fn));
  }

  {  // generator: MSE to a fixed target
    CondNet<double> gen = build_generator<double>(4, 4, 64);
    gen.net.init_params(13);
    auto ws = gen.net.make_workspace();
    Rng rng(31);
    const auto x = random_tensor({1, 1, 4, 64}, rng);
    nn::Tensor<double> target({1, 2, 4, 64});
    for (auto& v : target.data) v = rng.uniform(0.0, 1.0);
    const auto stage = [&] {
      ws.reset();
      ws.set_input(gen.in, x);
      ws.set_labels(gen.labels, {1});
    };
    const auto loss_fn = [&]() -> double {
      stage();
      const auto& y = gen.net.forward(ws, gen.out);
      double acc = 0.0;
      for (size_t i = 0; i < y.data.size(); ++i) {
        const double d = y.data[i] - target.data[i];
        acc += 0.5 * d * d;
      }
      return acc;
    };
    const auto grad_fn = [&] {
      gen.net.zero_grad();
      stage();
      const auto& y = gen.net.forward(ws, gen.out);
      nn::Tensor<double> seed = y;
      for (size_t i = 0; i < seed.data.size(); ++i) seed.data[i] -= target.data[i];
      gen.net.backward(ws, gen.out, seed);
    };
    track("generator", gradcheck(gen.net, loss_fn, grad_fn, 1e-5, 200));
  }

  {  // discriminator: binary cross-entropy against the fake target
    CondNet<double> dis = build_discriminator<double>(4, 4, 64);
    dis.net.init_params(17);
    auto ws = dis.net.make_workspace();
    Rng rng(37);
    const auto x = random_tensor({2, 1, 4, 64}, rng);
    const std::vector<double> targets{0.0, 1.0};
    const int logits = dis.net.pre_activation(dis.out);
    const auto stage = [&] {
      ws.reset();
      ws.set_input(dis.in, x);
      ws.set_labels(dis.labels, {2, 0});
    };
    nn::Tensor<double> scratch;
    const auto loss_fn = [&]() -> double {
      stage();
      const auto& p = dis.net.forward(ws, dis.out);
      return nn::bce_with_logit_grad(p, targets, scratch);
    };
    const auto grad_fn = [&] {
      dis.net.zero_grad();
      stage();
      const auto& p = dis.net.forward(ws, dis.out);
      nn::Tensor<double> grad;
      nn::bce_with_logit_grad(p, targets, grad);
      dis.net.backward(ws, logits, grad);
    };
    track("discriminator", gradcheck(dis.net, loss_fn, grad_fn, 1e-5, 200));
  }

  {  // joint model: one decoder head's MSE and the classifier's CCE
    JcaecnnNet<double> net = build_jcaecnn<double>(4, 3, 4, 64);
    net.net.init_params(19);
    auto ws = net.net.make_workspace();
    Rng rng(41);
    const auto x = random_tensor({1, 1, 4, 64}, rng);
    nn::Tensor<double> target({1, 1, 4, 64});
    for (auto& v : target.data) v = rng.uniform(0.0, 1.0);
    const auto stage = [&] {
      ws.reset();
      ws.set_input(net.in, x);
    };

    const int head = net.heads[1];
    const auto head_loss = [&]() -> double {
      stage();
      const auto& y = net.net.forward(ws, head);
      double acc = 0.0;
      for (size_t i = 0; i < y.data.size(); ++i) {
        const double d = y.data[i] - target.data[i];
        acc += 0.5 * d * d;
      }
      return acc;
    };
    const auto head_grad = [&] {
      net.net.zero_grad();
      stage();
      const auto& y = net.net.forward(ws, head);
      nn::Tensor<double> seed = y;
      for (size_t i = 0; i < seed.data.size(); ++i) seed.data[i] -= target.data[i];
      net.net.backward(ws, head, seed);
    };
    track("joint-decoder", gradcheck(net.net, head_loss, head_grad, 1e-5, 200));

    const std::vector<int> labels{2};
    const int logits = net.net.pre_activation(net.prob);
    nn::Tensor<double> scratch;
    const auto cls_loss = [&]() -> double {
      stage();
      const auto& p = net.net.forward(ws, net.prob);
      return nn::cce_with_logit_grad(p, labels, 1.0, scratch);
    };
    const auto cls_grad = [&] {
      net.net.zero_grad();
      stage();
      const auto& p = net.net.forward(ws, net.prob);
      nn::Tensor<double> grad;
      nn::cce_with_logit_grad(p, labels, 1.0, grad);
      net.net.backward(ws, logits, grad);
    };
    track("joint-classifier", gradcheck(net.net, cls_loss, cls_grad, 1e-5, 200));
  }

  const bool pass = worst < 1e-4;
  return {pass, "max relative gradient error " + fmt(worst) + " (limit 1e-4, worst: " +
                    worst_net + ")"};
}

// --- criterion 5: loss oracles ------------------------------------------------
Outcome c5_loss_oracles() {
  std::string fail;

  for (int n : {2, 4, 16}) {
    nn::Tensor<float> pred({1, n});
    for (auto& v : pred.data) v = 1.0f / static_cast<float>(n);
    nn::Tensor<float> onehot({1, n});
    onehot.data[0] = 1.0f;
    const double got = nn::loss_cce(pred, onehot);
    if (std::abs(got - std::log(static_cast<double>(n))) > 1e-6) {
      fail += " uniform-cce n=" + std::to_string(n) + " got " + fmt(got) + ";";
    }
  }

  const LossWeights w5 = o_weights(5);
  const std::vector<double> expect_k{32.0, 16.0, 8.0, 4.0, 2.0};
  if (w5.lambda_k != expect_k || w5.lambda_c != 32.0) fail += " optimized-weights wrong;";

  {  // perfect reconstruction + perfect classification costs exactly zero
    nn::Tensor<float> r({1, 1, 4, 8});
    for (size_t i = 0; i < r.data.size(); ++i) r.data[i] = static_cast<float>(i) / 32.0f;
    nn::Tensor<float> probs({1, 4});
    probs.data[2] = 1.0f;
    const CompositeParts parts =
        composite_loss({r, r}, {r, r}, probs, probs, o_weights(2), true);
    if (parts.total != 0.0) fail += " zero-loss composite got " + fmt(parts.total) + ";";
  }

  const bool pass = fail.empty();
  return {pass, pass ? "uniform CCE = ln N for N in {2,4,16}, weight ladder (32,16,8,4,2;32), "
                       "zero composite at the optimum"
                     : ("oracle mismatches:" + fail)};
}

// --- criterion 6: adversarial equilibrium ------------------------------------
// A small conditional GAN trained on a separable toy distribution must leave
// the discriminator unable to tell held-out real samples apart (mean output
// in [0.4, 0.6]) while the generator stays usable.
Outcome c6_adversarial() {
  const int rows = 4, cols = 8;
  const auto make_set = [&](int per_label, uint64_t seed) {
    std::vector<LabeledPreamble> set;
    Rng rng(seed);
    for (int y = 0; y < 2; ++y) {
      for (int i = 0; i < per_label; ++i) {
        LabeledPreamble s;
        s.label = y;
        s.data = nn::Tensor<float>({1, rows, cols});
        const int peak = y == 0 ? 2 : 5;
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < cols; ++c) {
            const double base = c == peak ? 0.9 : 0.1;
            const double v = base + rng.uniform(-0.05, 0.05);
            s.data.data[static_cast<size_t>(r * cols + c)] =
                static_cast<float>(std::min(1.0, std::max(0.0, v)));
          }
        }
        set.push_back(std::move(s));
      }
    }
    return set;
  };

  const std::vector<LabeledPreamble> noisy = make_set(24, 501);
  const std::vector<LabeledPreamble> clean = make_set(24, 502);
  const std::vector<LabeledPreamble> held_out = make_set(32, 503);

  Cgan model = build_cgan(2, rows, cols);
  CganConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 16;
  cfg.seed = 7;
  cfg.plateau_window = 0;
  train_cgan(model, noisy, clean, cfg);

  // discriminator response to held-out real samples
  auto ws = model.d.net.make_workspace();
  double mean_d = 0.0;
  for (const auto& s : held_out) {
    ws.reset();
    nn::Tensor<float> x({1, 1, rows, cols});
    x.data = s.data.data;
    ws.set_input(model.d.in, x);
    ws.set_labels(model.d.labels, {s.label});
    mean_d += model.d.net.forward(ws, model.d.out).data[0];
  }
  mean_d /= static_cast<double>(held_out.size());

  // generator output stays a valid normalized plane
  IqNlTensor probe;
  probe.n = cols;
  probe.rows.assign(static_cast<size_t>(rows * cols), 0.4);
  const IqNlTensor eq = cgan_equalize(model, probe, 1);
  bool in_range = eq.n == cols;
  for (double v : eq.rows) in_range = in_range && v >= 0.0 && v <= 1.0 && std::isfinite(v);

  const bool pass = mean_d >= 0.4 && mean_d <= 0.6 && in_range;
  return {pass, "held-out discriminator mean " + fmt(mean_d) +
                    " (limits [0.4, 0.6]), generator output in [0,1]: " +
                    (in_range ? "yes" : "no")};
}

// --- criteria 7-10: the desk-scale protocol ----------------------------------

struct DeskRun {
  ExperimentConfig cfg;
  Dataset ds;
  HarnessModels models;
  std::vector<PipelineResult> results;
};

DeskRun desk_run() {
  DeskRun r;
  r.cfg = ExperimentConfig::desk_defaults();
  r.cfg.master_seed = 1;
  r.ds = generate_dataset(r.cfg);
  r.models = train_models(r.ds, "all");
  r.results = run_pipelines(r.ds, r.models, "all");
  return r;
}

const MetricsRecord* find_metrics(const std::vector<PipelineResult>& rs,
                                  const std::string& pipeline, double snr_db) {
  for (const auto& r : rs) {
    if (r.pipeline != pipeline) continue;
    for (const auto& m : r.metrics) {
      if (m.snr_db == snr_db) return &m;
    }
  }
  return nullptr;
}

Outcome c7_desk_accuracy(const DeskRun& run) {
  std::string fail;

  // (a) the AWGN-trained classifier must identify clean (channel-free)
  // captures nearly perfectly at every grid SNR
  double worst_clean = 1.0;
  for (size_t s = 0; s < run.cfg.snr_grid_db.size(); ++s) {
    int64_t hits = 0, total = 0;
    for (size_t rid : run.ds.test_ids) {
      for (int z = 0; z < run.cfg.n_noise; ++z) {
        const IqNlTensor t = clean_tensor(run.ds, rid, static_cast<int>(s), z);
        const int pred = nn::argmax_label(classify_probs(run.models.awgn_cnn, t));
        hits += pred == run.ds.records[rid].emitter ? 1 : 0;
        ++total;
      }
    }
    worst_clean = std::min(worst_clean, static_cast<double>(hits) / static_cast<double>(total));
  }
  if (worst_clean < 0.95) fail += " clean-capture accuracy " + fmt(worst_clean) + " < 0.95;";

  // (b) the joint model at the top of the grid
  const MetricsRecord* j30 = find_metrics(run.results, "jcaecnn", 30.0);
  if (j30 == nullptr) {
    fail += " missing jcaecnn @ 30 dB;";
  } else if (j30->accuracy < 0.90) {
    fail += " jcaecnn @ 30 dB accuracy " + fmt(j30->accuracy) + " < 0.90;";
  }

  // (c) accuracy must not degrade with SNR beyond noise wiggle
  for (const auto& r : run.results) {
    const MetricsRecord* lo = find_metrics(run.results, r.pipeline, 9.0);
    const MetricsRecord* hi = find_metrics(run.results, r.pipeline, 30.0);
    if (lo == nullptr || hi == nullptr) {
      fail += " " + r.pipeline + " missing grid endpoints;";
    } else if (hi->accuracy < lo->accuracy - 0.03) {
      fail += " " + r.pipeline + " inverted: " + fmt(hi->accuracy) + " @ 30 dB vs " +
              fmt(lo->accuracy) + " @ 9 dB;";
    }
  }

  if (!fail.empty()) return {false, "desk protocol:" + fail};
  std::string detail = "clean-capture accuracy >= " + fmt(worst_clean) +
                       " at every SNR, jcaecnn @ 30 dB = " + fmt(j30->accuracy) +
                       ", no pipeline loses more than 3 points from 9 to 30 dB";
  return {true, detail};
}

Outcome c8_counters(const DeskRun& run) {
  std::string fail;
  const int64_t n_d = run.cfg.n_emitters;
  const int64_t paths = run.cfg.channel.L;
  for (const auto& r : run.results) {
    for (const auto& m : r.metrics) {
      try {
        validate_metrics(m);
      } catch (const std::exception& e) {
        fail += " " + r.pipeline + " metrics invalid (" + e.what() + ");";
        continue;
      }
      const PipelineCounters& c = m.counters;
      if (r.pipeline == "trad") {
        if (c.estimations != c.decisions * 5 * n_d || c.classifications != c.decisions ||
            c.equalizations != 0 || c.votes != 0) {
          fail += " trad counters off;";
        }
      } else if (r.pipeline == "cgan") {
        if (c.equalizations != c.decisions * n_d || c.classifications != c.decisions * n_d ||
            c.estimations != 0 || c.votes != 0) {
          fail += " cgan counters off;";
        }
      } else {  // jcaecnn / o-jcaecnn
        if (c.votes != c.decisions * (paths + 1) || c.classifications != c.decisions * paths ||
            c.estimations != 0 || c.equalizations != 0) {
          fail += " " + r.pipeline + " counters off;";
        }
      }
    }
    int64_t decisions = 0;
    for (const auto& m : r.metrics) decisions += m.decisions;
    if (decisions != r.totals.decisions) fail += " " + r.pipeline + " total mismatch;";
    const int64_t expected =
        static_cast<int64_t>(run.ds.test_ids.size()) * run.cfg.n_noise *
        static_cast<int64_t>(run.cfg.snr_grid_db.size());
    if (decisions != expected)fail += " " + r.pipeline + " decision count " +
                                      std::to_string(decisions) + " != " +
                                      std::to_string(expected) + ";";
  }
  if (!fail.empty()) return {false, "counter audit:" + fail};
  return {true, "every pipeline's estimation/equalization/classification/vote counters satisfy "
                "the per-decision bookkeeping identities"};
}

Outcome c9_reproducibility(const DeskRun& first, const std::string& scratch) {
  const std::string dir_a = scratch + "/rep_a";
  const std::string dir_b = scratch + "/rep_b";
  report(first.results, dir_a);

  // full independent re-run from the same configuration
  const Dataset ds2 = generate_dataset(first.cfg);
  const HarnessModels models2 = train_models(ds2, "all");
  const std::vector<PipelineResult> results2 = run_pipelines(ds2, models2, "all");
  report(results2, dir_b);

  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir_a)) {
    names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  std::string fail;
  for (const std::string& name : names) {
    std::ifstream fa(dir_a + "/" + name, std::ios::binary);
    std::ifstream fb(dir_b + "/" + name, std::ios::binary);
    if (!fb) {
      fail += " " + name + " missing from the second run;";
      continue;
    }
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    if (sa.str() != sb.str()) fail += " " + name + " differs;";
  }
  if (!fail.empty()) return {false, "re-run artifacts:" + fail};
  return {true, "independent re-run reproduced all " + std::to_string(names.size()) +
                    " report artifacts byte for byte"};
}

Outcome c10_optimized_weights(const DeskRun& run) {
  const auto mean_acc = [&](const std::string& pipeline) {
    double acc = 0.0;
    int n = 0;
    for (const auto& r : run.results) {
      if (r.pipeline != pipeline) continue;
      for (const auto& m : r.metrics) {
        acc += m.accuracy;
        ++n;
      }
    }
    return n > 0 ? acc / n : -1.0;
  };
  const double plain = mean_acc("jcaecnn");
  const double opt = mean_acc("o-jcaecnn");
  const bool pass = plain >= 0.0 && opt >= 0.0 && opt >= plain - 0.01;
  return {pass, "grid-mean accuracy: optimized weights " + fmt(opt) + ", unit weights " +
                    fmt(plain) + " (optimized must be within 0.01 below or better)"};
}

}  // namespace

int main() {
  std::vector<std::pair<int, std::function<Outcome()>>> checks;
  checks.emplace_back(1, c1_channel_statistics);
  checks.emplace_back(2, c2_estimator_accuracy);
  checks.emplace_back(3, c3_equalizer);
  checks.emplace_back(4, c4_gradients);
  checks.emplace_back(5, c5_loss_oracles);
  checks.emplace_back(6, c6_adversarial);

  int failures = 0;
  const auto emit = [&](int k, const Outcome& o) {
    std::cout << "CRITERION " << k << ": " << (o.pass ? "PASS" : "FAIL") << " — " << o.detail
              << std::endl;
    if (!o.pass) ++failures;
  };

  for (const auto& [k, fn] : checks) {
    try {
      emit(k, fn());
    } catch (const std::exception& e) {
      emit(k, {false, std::string("exception: ") + e.what()});
    }
  }

  // criteria 7-10 share one desk-scale protocol run
  const std::string scratch = (fs::temp_directory_path() / "rfdna_acceptance").string();
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  try {
    const DeskRun run = desk_run();
    for (const auto& [k, fn] : std::vector<std::pair<int, std::function<Outcome()>>>{
             {7, [&] { return c7_desk_accuracy(run); }},
             {8, [&] { return c8_counters(run); }},
             {9, [&] { return c9_reproducibility(run, scratch); }},
             {10, [&] { return c10_optimized_weights(run); }}}) {
      try {
        emit(k, fn());
      } catch (const std::exception& e) {
        emit(k, {false, std::string("exception: ") + e.what()});
      }
    }
  } catch (const std::exception& e) {
    for (int k = 7; k <= 10; ++k) {
      emit(k, {false, std::string("desk run failed: ") + e.what()});
    }
  }

  std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : std::to_string(failures) + " CRITERIA FAILED")
            << std::endl;
  return failures;
}
