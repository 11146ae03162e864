#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rfdna/cgan.hpp"
#include "rfdna/nn/train.hpp"
#include "rfdna/rng.hpp"
#include "test_util.hpp"

using namespace rfdna;

namespace {

// two-class toy at the 4-row signal geometry: fixed per-label patterns with
// small jitter, identically distributed "multipath" and "clean" sets (a null
// channel)
std::vector<LabeledPreamble> toy_set(int per_label, uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledPreamble> out;
  for (int y = 0; y < 2; ++y) {
    for (int i = 0; i < per_label; ++i) {
      LabeledPreamble rec;
      rec.label = y;
      rec.data = nn::Tensor<float>({1, 4, 8});
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 8; ++c) {
          const double base = y == 0 ? (c == 2 ? 0.8 : 0.2) : (c == 5 ? 0.9 : 0.35);
          rec.data.data[static_cast<size_t>(r * 8 + c)] =
              static_cast<float>(std::clamp(base + 0.05 * rng.gaussian(), 0.0, 1.0));
        }
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

CganConfig quick_cfg(int epochs, uint64_t seed) {
  CganConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 8;
  cfg.d_steps = 1;
  cfg.seed = seed;
  cfg.plateau_window = 0;
  return cfg;
}

}  // namespace

TEST_SUITE("cgan") {

TEST_CASE("builder geometry: generator mirrors its two-channel input") {
  const auto m = build_cgan(4, 4, 320);
  CHECK(m.g.net.node(m.g.out).out_shape == std::vector<int>{2, 4, 320});
  CHECK(m.d.net.node(m.d.out).out_shape == std::vector<int>{1});
  CHECK(m.g.rows == 4);
  CHECK(m.g.cols == 320);
  CHECK(m.g.n_labels == 4);
  CHECK(m.g.embed_dim == 50);
  // conditioning head exists in both networks
  CHECK(m.g.embed >= 0);
  CHECK(m.g.label_plane >= 0);
  CHECK(m.d.embed >= 0);
  CHECK(m.d.label_plane >= 0);
  CHECK_THROWS_AS(build_cgan(1, 4, 320), std::invalid_argument);
  CHECK_THROWS_AS(build_cgan(4, 4, 321), std::invalid_argument);   // odd cols
  CHECK_THROWS_AS(build_classifier<float>(4, 0, 320), std::invalid_argument);
}

TEST_CASE("label embedding is deterministic and separates labels") {
  auto net = build_generator<float>(4, 2, 8, 10);
  net.net.init_params(99);
  const auto a1 = embed_label(net, 1);
  const auto a2 = embed_label(net, 1);
  const auto b = embed_label(net, 3);
  CHECK(a1.label == 1);
  CHECK(a1.embedding.size() == 10);
  CHECK(a1.plane.shape == std::vector<int>{1, 2, 8});
  CHECK(a1.embedding == a2.embedding);
  CHECK(a1.plane.data == a2.plane.data);
  CHECK(a1.embedding != b.embedding);
  CHECK_THROWS_AS(embed_label(net, 4), std::invalid_argument);
  CHECK_THROWS_AS(embed_label(net, -1), std::invalid_argument);
}

TEST_CASE("tensor plumbing round-trips at float precision") {
  IqNlTensor t;
  t.n = 6;
  t.rows.resize(24);
  for (int i = 0; i < 24; ++i) t.rows[static_cast<size_t>(i)] = i / 32.0;  // float-exact
  const auto x = iqnl_to_tensor(t);
  CHECK(x.shape == std::vector<int>{1, 4, 6});
  const auto back = tensor_to_iqnl(x);
  CHECK(back.n == 6);
  for (int i = 0; i < 24; ++i) CHECK(back.rows[static_cast<size_t>(i)] == t.rows[static_cast<size_t>(i)]);
  // batch extraction picks the requested sample
  nn::Tensor<float> batch({2, 1, 4, 6});
  for (size_t i = 0; i < 24; ++i) batch.data[i] = 1.0f;
  for (size_t i = 24; i < 48; ++i) batch.data[i] = 2.0f;
  CHECK(tensor_to_iqnl(batch, 1).rows[0] == 2.0);
}

TEST_CASE("equalizing with an untrained model is an error") {
  Cgan m = build_cgan(2, 4, 8);
  IqNlTensor t;
  t.n = 8;
  t.rows.assign(8 * 4, 0.25);
  // the equalizer expects rows*cols doubles laid out as its plane
  CHECK_THROWS_WITH_AS(cgan_equalize(m, t, 0), "cgan_equalize: generator is untrained",
                       std::runtime_error);
}

TEST_CASE("config validation rejects bad settings") {
  CganConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = CganConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = CganConfig{};
  cfg.d_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = CganConfig{};
  cfg.g_optim.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = CganConfig{};
  cfg.plateau_window = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = CganConfig{};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("adversarial training runs, records curves, and is reproducible") {
  const auto multipath = toy_set(8, 1);
  const auto clean = toy_set(8, 2);

  const auto curves_path =
      (std::filesystem::temp_directory_path() / "rfdna_test_cgan_curves.csv").string();
  auto cfg = quick_cfg(5, 77);
  cfg.curves_path = curves_path;

  Cgan m1 = build_cgan(2, 4, 8);
  const auto curves = train_cgan(m1, multipath, clean, cfg);
  CHECK(m1.trained);
  CHECK(curves.epochs_run == 5);
  REQUIRE(curves.d_loss.size() == 5);
  REQUIRE(curves.g_loss.size() == 5);
  REQUIRE(curves.d_out_real_mean.size() == 5);
  REQUIRE(curves.d_out_fake_mean.size() == 5);
  for (int e = 0; e < 5; ++e) {
    CHECK(std::isfinite(curves.d_loss[static_cast<size_t>(e)]));
    CHECK(std::isfinite(curves.g_loss[static_cast<size_t>(e)]));
    CHECK(curves.d_out_real_mean[static_cast<size_t>(e)] > 0.0);
    CHECK(curves.d_out_real_mean[static_cast<size_t>(e)] < 1.0);
    CHECK(curves.d_out_fake_mean[static_cast<size_t>(e)] > 0.0);
    CHECK(curves.d_out_fake_mean[static_cast<size_t>(e)] < 1.0);
  }

  // the curves file mirrors the in-memory values
  std::ifstream f(curves_path);
  REQUIRE(f.good());
  std::string header;
  std::getline(f, header);
  CHECK(header == "epoch,d_loss,g_loss,d_out_real_mean,d_out_fake_mean");
  int rows = 0;
  for (std::string line; std::getline(f, line);) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 5);
  f.close();
  std::filesystem::remove(curves_path);

  // bitwise reproducibility for a fixed seed
  cfg.curves_path.clear();
  Cgan m2 = build_cgan(2, 4, 8);
  const auto curves2 = train_cgan(m2, multipath, clean, cfg);
  CHECK(curves2.d_loss == curves.d_loss);
  for (size_t i = 0; i < m1.g.net.params().size(); ++i) {
    CHECK(m1.g.net.params()[i].value.data == m2.g.net.params()[i].value.data);
  }

  // and the trained equalizer is a pure function of (input, label)
  IqNlTensor t;
  t.n = 8;
  t.rows.assign(32, 0.3);
  const auto e1 = cgan_equalize(m1, t, 0);
  const auto e2 = cgan_equalize(m1, t, 0);
  const auto e3 = cgan_equalize(m1, t, 1);
  CHECK(e1.rows == e2.rows);
  CHECK(e1.rows != e3.rows);  // conditioning matters
  CHECK(m1.equalize_calls >= 3);
  CHECK_THROWS_AS(cgan_equalize(m1, t, 5), std::invalid_argument);

  CHECK_THROWS_AS(train_cgan(m1, {}, clean, cfg), std::invalid_argument);
}

TEST_CASE("early stopping trips on a plateau") {
  const auto multipath = toy_set(8, 3);
  const auto clean = toy_set(8, 4);
  auto cfg = quick_cfg(400, 5);
  cfg.g_optim.lr = 1e-9;  // effectively frozen nets -> flat curves
  cfg.d_optim.lr = 1e-9;
  cfg.plateau_window = 10;
  cfg.plateau_tol = 0.05;
  Cgan m = build_cgan(2, 4, 8);
  const auto curves = train_cgan(m, multipath, clean, cfg);
  CHECK(curves.early_stopped);
  CHECK(curves.epochs_run < 400);
  CHECK(curves.epochs_run >= 10);
}

TEST_CASE("supervised classifier training separates an easy toy task") {
  const auto data = toy_set(12, 9);
  auto cls = build_classifier<float>(2, 4, 8);
  nn::TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 8;
  cfg.optim.lr = 2e-3;
  cfg.seed = 11;
  const auto curve = train_classifier(cls, data, cfg);
  REQUIRE(curve.size() == 40);
  CHECK(curve.back() < curve.front());
  int correct = 0;
  for (const auto& rec : data) {
    const auto probs = classify_probs(cls, tensor_to_iqnl(rec.data));
    if (nn::argmax_label(probs) == rec.label) ++correct;
  }
  CHECK(correct == static_cast<int>(data.size()));
  CHECK_THROWS_AS(train_classifier(cls, {}, cfg), std::invalid_argument);
}

TEST_CASE("confidence rule returns the conditioning label of the global maximum") {
  using testutil::probe_classifier;
  using testutil::probe_plane;
  // logits for label c: c*v + 0 -> bigger v concentrates mass on class 1
  auto cls = probe_classifier(2, 8, {0.0, 0.0});
  std::vector<IqNlTensor> set = {probe_plane(8, 0.1), probe_plane(8, 2.0)};
  std::vector<std::vector<double>> q;
  const int who = classify_confidence(cls, set, &q);
  REQUIRE(q.size() == 2);
  REQUIRE(q[0].size() == 2);
  // row i is the softmax of (0, v_i): hand-computed entries
  const auto soft1 = [](double v) { return std::exp(v) / (1.0 + std::exp(v)); };
  CHECK(q[0][1] == doctest::Approx(soft1(0.1)).epsilon(1e-5));
  CHECK(q[1][1] == doctest::Approx(soft1(2.0)).epsilon(1e-5));
  // global max is q[1][1] -> conditioning label 1
  CHECK(who == 1);

  // all-equal matrix -> lowest conditioning label
  std::vector<IqNlTensor> flat = {probe_plane(8, 0.0), probe_plane(8, 0.0)};
  CHECK(classify_confidence(cls, flat) == 0);

  CHECK_THROWS_AS(classify_confidence(cls, {probe_plane(8, 0.1)}), std::invalid_argument);
}

TEST_CASE("confidence rule agrees with a brute-force scan of the q matrix") {
  using testutil::probe_classifier;
  using testutil::probe_plane;
  auto cls = probe_classifier(3, 8, {0.2, -0.4, 0.1});
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<IqNlTensor> set;
    for (int i = 0; i < 3; ++i) set.push_back(probe_plane(8, rng.uniform()));
    std::vector<std::vector<double>> q;
    const int who = classify_confidence(cls, set, &q);
    int bi = 0, bj = 0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        if (q[static_cast<size_t>(i)][static_cast<size_t>(j)] > q[static_cast<size_t>(bi)][static_cast<size_t>(bj)]) {
          bi = i;
          bj = j;
        }
      }
    }
    CHECK(who == bi);
  }
}

TEST_CASE("train-snr grid search tabulates the builder and picks the best row") {
  // synthetic pipeline: accuracy decays with |train - test| distance
  std::vector<double> calls;
  const auto builder = [&](double train_snr) {
    calls.push_back(train_snr);
    return [train_snr](double test_snr) { return 1.0 / (1.0 + std::abs(train_snr - test_snr)); };
  };
  const std::vector<double> trains = {9.0, 18.0, 30.0};
  const std::vector<double> tests = {9.0, 18.0, 30.0};
  const auto res = grid_search_train_snr(trains, tests, builder);
  CHECK(calls == trains);  // one pipeline per train snr, in order
  REQUIRE(res.accuracy.size() == 3);
  REQUIRE(res.accuracy[0].size() == 3);
  for (size_t t = 0; t < tests.size(); ++t) {
    CHECK(res.best_train_index_per_test[t] == static_cast<int>(t));  // diagonal wins
    CHECK(res.best_train_per_test[t] == trains[t]);
  }
  CHECK(res.accuracy[0][0] == doctest::Approx(1.0));
  CHECK(res.accuracy[0][2] == doctest::Approx(1.0 / 22.0));

  // a constant surface ties everywhere -> lowest index everywhere
  const auto flat = grid_search_train_snr(trains, tests, [](double) {
    return [](double) { return 0.5; };
  });
  for (size_t t = 0; t < tests.size(); ++t) {
    CHECK(flat.best_train_index_per_test[t] == 0);
    CHECK(flat.best_train_per_test[t] == trains[0]);
  }
  CHECK(flat.best_train_index_overall == 0);
  CHECK(flat.best_train_overall == trains[0]);

  CHECK_THROWS_AS(grid_search_train_snr({}, tests, builder), std::invalid_argument);
}

}  // TEST_SUITE
