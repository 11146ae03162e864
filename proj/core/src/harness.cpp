#include "rfdna/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "rfdna/mmse.hpp"
#include "rfdna/nmestimator.hpp"
#include "rfdna/nn/serialize.hpp"

namespace rfdna {

namespace {

using json = nlohmann::ordered_json;

constexpr int kCandidatesPerEmitter = 5;

// noise-stream stage below a record's noise_seed
uint64_t noise_stream(int kind, int snr_index, int realization) {
  return static_cast<uint64_t>(kind) * 1000000ull + static_cast<uint64_t>(snr_index) * 1024ull +
         static_cast<uint64_t>(realization);
}

ComplexSignal truncate_to(ComplexSignal x, size_t n) {
  if (x.samples.size() < n) throw std::logic_error("truncate_to: signal shorter than target");
  x.samples.resize(n);
  return x;
}

void check_indices(const Dataset& ds, size_t record, int snr_index, int realization) {
  if (record >= ds.records.size()) throw std::out_of_range("dataset: record index out of range");
  if (snr_index < 0 || static_cast<size_t>(snr_index) >= ds.cfg.snr_grid_db.size()) {
    throw std::out_of_range("dataset: snr index out of range");
  }
  if (realization < 0 || realization >= ds.cfg.n_noise) {
    throw std::out_of_range("dataset: noise realization out of range");
  }
}

std::string snr_label(double snr_db) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", snr_db);
  return buf;
}

int lowest_snr_index(const std::vector<double>& grid) {
  return static_cast<int>(std::min_element(grid.begin(), grid.end()) - grid.begin());
}

}  // namespace

// --- config -----------------------------------------------------------------

int ExperimentConfig::n_train_per_emitter() const {
  return static_cast<int>(std::llround(split_fraction * n_preambles));
}

int ExperimentConfig::n_test_per_emitter() const { return n_preambles - n_train_per_emitter(); }

void ExperimentConfig::validate() const {
  if (n_emitters != 4 && n_emitters != 8 && n_emitters != 16 && n_emitters != 32) {
    throw std::invalid_argument("config: n_emitters must be one of {4, 8, 16, 32}");
  }
  if (n_preambles < 10) throw std::invalid_argument("config: n_preambles must be >= 10");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw std::invalid_argument("config: split_fraction must be in (0, 1)");
  }
  if (n_train_per_emitter() < kCandidatesPerEmitter || n_test_per_emitter() < 1) {
    throw std::invalid_argument("config: split leaves too few train or test preambles");
  }
  if (snr_grid_db.empty()) throw std::invalid_argument("config: snr grid is empty");
  for (double s : snr_grid_db) {
    if (!std::isfinite(s)) throw std::invalid_argument("config: snr grid must be finite");
  }
  if (n_noise < 1) throw std::invalid_argument("config: n_noise must be >= 1");
  if (train_realizations < 1 || train_realizations > n_noise) {
    throw std::invalid_argument("config: train_realizations must be in [1, n_noise]");
  }
  if (channel.L < 1) throw std::invalid_argument("config: channel path count must be >= 1");
  if (channel.t_rms_s <= 0.0 || channel.t_sample_s <= 0.0) {
    throw std::invalid_argument("config: channel time constants must be > 0");
  }
  if (sample_rate_hz != 20e6) throw std::invalid_argument("config: sample rate must be 20 MHz");
  if (pipeline != "all" && pipeline != "trad" && pipeline != "cgan" && pipeline != "jcaecnn" &&
      pipeline != "o-jcaecnn") {
    throw std::invalid_argument("config: unknown pipeline '" + pipeline + "'");
  }
  cgan.validate();
  cls_train.validate();
  jcaecnn_train.validate();
}

ExperimentConfig ExperimentConfig::desk_defaults() {
  ExperimentConfig cfg;
  cfg.n_emitters = 4;
  cfg.n_preambles = 200;
  cfg.snr_grid_db = {9.0, 18.0, 30.0};
  cfg.n_noise = 3;
  cfg.split_fraction = 0.9;
  cfg.train_realizations = 1;

  cfg.cgan.epochs = 40;
  cfg.cgan.batch_size = 64;
  cfg.cgan.d_steps = 1;

  cfg.cls_train.optim.lr = 1e-3;
  cfg.cls_train.batch_size = 64;
  cfg.cls_train.epochs = 25;

  cfg.jcaecnn_train.optim.lr = 1e-3;
  cfg.jcaecnn_train.batch_size = 32;
  cfg.jcaecnn_train.epochs = 12;
  return cfg;
}

ExperimentConfig ExperimentConfig::full_defaults() {
  ExperimentConfig cfg;
  cfg.n_emitters = 4;
  cfg.n_preambles = 2000;
  cfg.snr_grid_db.clear();
  for (double s = 9.0; s <= 30.0; s += 3.0) cfg.snr_grid_db.push_back(s);
  cfg.n_noise = 10;
  cfg.split_fraction = 0.9;
  cfg.train_realizations = 1;

  cfg.cgan.epochs = 10000;
  cfg.cgan.batch_size = 256;
  cfg.cgan.d_steps = 1;

  cfg.cls_train.optim.lr = 1e-3;
  cfg.cls_train.batch_size = 256;
  cfg.cls_train.epochs = 100;

  cfg.jcaecnn_train.optim.lr = 1e-3;
  cfg.jcaecnn_train.batch_size = 256;
  cfg.jcaecnn_train.epochs = 300;
  return cfg;
}

namespace {

void apply_json(ExperimentConfig& cfg, const json& j) {
  for (const auto& [key, val] : j.items()) {
    if (key == "profile") {
      continue;  // consumed by the caller
    } else if (key == "n_emitters") {
      cfg.n_emitters = val.get<int>();
    } else if (key == "n_preambles") {
      cfg.n_preambles = val.get<int>();
    } else if (key == "channel") {
      for (const auto& [ck, cv] : val.items()) {
        if (ck == "paths") {
          cfg.channel.L = cv.get<int>();
        } else if (ck == "t_rms_s") {
          cfg.channel.t_rms_s = cv.get<double>();
        } else if (ck == "t_sample_s") {
          cfg.channel.t_sample_s = cv.get<double>();
        } else {
          throw std::invalid_argument("config: unknown key channel." + ck);
        }
      }
    } else if (key == "snr_grid_db") {
      cfg.snr_grid_db = val.get<std::vector<double>>();
    } else if (key == "n_noise") {
      cfg.n_noise = val.get<int>();
    } else if (key == "split_fraction") {
      cfg.split_fraction = val.get<double>();
    } else if (key == "train_realizations") {
      cfg.train_realizations = val.get<int>();
    } else if (key == "master_seed") {
      cfg.master_seed = val.get<uint64_t>();
    } else if (key == "sample_rate_hz") {
      cfg.sample_rate_hz = val.get<double>();
    } else if (key == "pipeline") {
      cfg.pipeline = val.get<std::string>();
    } else if (key == "classifier_per_path") {
      cfg.classifier_per_path = val.get<bool>();
    } else if (key == "cgan") {
      for (const auto& [ck, cv] : val.items()) {
        if (ck == "epochs") {
          cfg.cgan.epochs = cv.get<int>();
        } else if (ck == "batch_size") {
          cfg.cgan.batch_size = cv.get<int>();
        } else if (ck == "d_steps") {
          cfg.cgan.d_steps = cv.get<int>();
        } else if (ck == "lr") {
          cfg.cgan.g_optim.lr = cv.get<double>();
          cfg.cgan.d_optim.lr = cv.get<double>();
        } else if (ck == "plateau_window") {
          cfg.cgan.plateau_window = cv.get<int>();
        } else if (ck == "plateau_tol") {
          cfg.cgan.plateau_tol = cv.get<double>();
        } else {
          throw std::invalid_argument("config: unknown key cgan." + ck);
        }
      }
    } else if (key == "classifier") {
      for (const auto& [ck, cv] : val.items()) {
        if (ck == "epochs") {
          cfg.cls_train.epochs = cv.get<int>();
        } else if (ck == "batch_size") {
          cfg.cls_train.batch_size = cv.get<int>();
        } else if (ck == "lr") {
          cfg.cls_train.optim.lr = cv.get<double>();
        } else if (ck == "l2_lambda") {
          cfg.cls_train.optim.l2 = cv.get<double>();
        } else {
          throw std::invalid_argument("config: unknown key classifier." + ck);
        }
      }
    } else if (key == "jcaecnn") {
      for (const auto& [ck, cv] : val.items()) {
        if (ck == "epochs") {
          cfg.jcaecnn_train.epochs = cv.get<int>();
        } else if (ck == "batch_size") {
          cfg.jcaecnn_train.batch_size = cv.get<int>();
        } else if (ck == "lr") {
          cfg.jcaecnn_train.optim.lr = cv.get<double>();
        } else {
          throw std::invalid_argument("config: unknown key jcaecnn." + ck);
        }
      }
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
  ExperimentConfig cfg = base;
  if (j.contains("profile")) {
    const auto p = j["profile"].get<std::string>();
    if (p == "desk") {
      cfg = ExperimentConfig::desk_defaults();
    } else if (p == "full") {
      cfg = ExperimentConfig::full_defaults();
    } else {
      throw std::invalid_argument("config: unknown profile '" + p + "'");
    }
  }
  apply_json(cfg, j);
  cfg.validate();
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["n_emitters"] = cfg.n_emitters;
  j["n_preambles"] = cfg.n_preambles;
  j["channel"] = {{"paths", cfg.channel.L},
                  {"t_rms_s", cfg.channel.t_rms_s},
                  {"t_sample_s", cfg.channel.t_sample_s}};
  j["snr_grid_db"] = cfg.snr_grid_db;
  j["n_noise"] = cfg.n_noise;
  j["split_fraction"] = cfg.split_fraction;
  j["train_realizations"] = cfg.train_realizations;
  j["master_seed"] = cfg.master_seed;
  j["sample_rate_hz"] = cfg.sample_rate_hz;
  j["pipeline"] = cfg.pipeline;
  j["classifier_per_path"] = cfg.classifier_per_path;
  j["cgan"] = {{"epochs", cfg.cgan.epochs},
               {"batch_size", cfg.cgan.batch_size},
               {"d_steps", cfg.cgan.d_steps},
               {"lr", cfg.cgan.g_optim.lr},
               {"plateau_window", cfg.cgan.plateau_window},
               {"plateau_tol", cfg.cgan.plateau_tol}};
  j["classifier"] = {{"epochs", cfg.cls_train.epochs},
                     {"batch_size", cfg.cls_train.batch_size},
                     {"lr", cfg.cls_train.optim.lr},
                     {"l2_lambda", cfg.cls_train.optim.l2}};
  j["jcaecnn"] = {{"epochs", cfg.jcaecnn_train.epochs},
                  {"batch_size", cfg.jcaecnn_train.batch_size},
                  {"lr", cfg.jcaecnn_train.optim.lr}};
  return j.dump(2) + "\n";
}

ExperimentConfig load_config_file(const std::string& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), base);
}

ExperimentConfig load_config_file(const std::string& path) {
  return load_config_file(path, ExperimentConfig::desk_defaults());
}

// --- dataset ----------------------------------------------------------------

Dataset generate_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.cfg = cfg;
  ds.fleet = draw_fleet(cfg.n_emitters, derive_seed(cfg.master_seed, kSeedFleet));

  const ComplexSignal pre = synthesize_preamble(cfg.sample_rate_hz);
  ds.clean.reserve(ds.fleet.size());
  for (const auto& p : ds.fleet) ds.clean.push_back(apply_impairments(pre, p));

  const uint64_t tdl_base = derive_seed(cfg.master_seed, kSeedTdl);
  const uint64_t noise_base = derive_seed(cfg.master_seed, kSeedNoise);
  ds.records.resize(static_cast<size_t>(cfg.n_emitters) * cfg.n_preambles);
  for (int e = 0; e < cfg.n_emitters; ++e) {
    for (int i = 0; i < cfg.n_preambles; ++i) {
      const size_t r = static_cast<size_t>(e) * cfg.n_preambles + i;
      DatasetRecord& rec = ds.records[r];
      rec.emitter = e;
      rec.index = i;
      Rng tdl_rng(derive_seed(tdl_base, r));
      rec.tdl = draw_tdl(cfg.channel, tdl_rng);
      rec.multipath = apply_channel(ds.clean[e], rec.tdl);
      rec.noise_seed = derive_seed(noise_base, r);
    }
  }

  // per-emitter shuffled split so every emitter keeps the same train share
  const uint64_t split_base = derive_seed(cfg.master_seed, kSeedSplit);
  const int n_train = cfg.n_train_per_emitter();
  for (int e = 0; e < cfg.n_emitters; ++e) {
    std::vector<int> idx(cfg.n_preambles);
    for (int i = 0; i < cfg.n_preambles; ++i) idx[i] = i;
    Rng rng(derive_seed(split_base, static_cast<uint64_t>(e)));
    rng.shuffle(idx);
    for (int i = 0; i < n_train; ++i) {
      ds.records[static_cast<size_t>(e) * cfg.n_preambles + idx[i]].train = true;
    }
  }
  for (size_t r = 0; r < ds.records.size(); ++r) {
    (ds.records[r].train ? ds.train_ids : ds.test_ids).push_back(r);
  }

  // normalization statistics come from the training split only: every noisy
  // training view (received and clean, at every grid SNR) contributes
  const size_t n = ds.clean[0].samples.size();
  bool first = true;
  for (size_t rid : ds.train_ids) {
    for (size_t s = 0; s < cfg.snr_grid_db.size(); ++s) {
      for (int z = 0; z < cfg.train_realizations; ++z) {
        const int si = static_cast<int>(s);
        accumulate_row_stats(ds.stats, to_iqnl(truncate_to(noisy_received(ds, rid, si, z), n)),
                             first);
        first = false;
        accumulate_row_stats(ds.stats, to_iqnl(noisy_clean(ds, rid, si, z)), false);
      }
    }
  }
  return ds;
}

ComplexSignal noisy_received(const Dataset& ds, size_t record, int snr_index, int realization) {
  check_indices(ds, record, snr_index, realization);
  const DatasetRecord& rec = ds.records[record];
  Rng rng(derive_seed(rec.noise_seed, noise_stream(0, snr_index, realization)));
  return add_awgn(rec.multipath, ds.cfg.snr_grid_db[snr_index], rng);
}

ComplexSignal noisy_clean(const Dataset& ds, size_t record, int snr_index, int realization) {
  check_indices(ds, record, snr_index, realization);
  const DatasetRecord& rec = ds.records[record];
  Rng rng(derive_seed(rec.noise_seed, noise_stream(1, snr_index, realization)));
  return add_awgn(ds.clean[rec.emitter], ds.cfg.snr_grid_db[snr_index], rng);
}

IqNlTensor received_tensor(const Dataset& ds, size_t record, int snr_index, int realization) {
  const size_t n = ds.clean[ds.records[record].emitter].samples.size();
  return minmax_normalize(to_iqnl(truncate_to(noisy_received(ds, record, snr_index, realization), n)),
                          ds.stats);
}

IqNlTensor clean_tensor(const Dataset& ds, size_t record, int snr_index, int realization) {
  return minmax_normalize(to_iqnl(noisy_clean(ds, record, snr_index, realization)), ds.stats);
}

// --- training-set assembly ----------------------------------------------------

std::vector<LabeledPreamble> awgn_training_set(const Dataset& ds) {
  std::vector<LabeledPreamble> set;
  set.reserve(ds.train_ids.size() * ds.cfg.snr_grid_db.size() * ds.cfg.train_realizations);
  for (size_t rid : ds.train_ids) {
    for (size_t s = 0; s < ds.cfg.snr_grid_db.size(); ++s) {
      for (int z = 0; z < ds.cfg.train_realizations; ++z) {
        set.push_back({iqnl_to_tensor(clean_tensor(ds, rid, static_cast<int>(s), z)),
                       ds.records[rid].emitter});
      }
    }
  }
  return set;
}

std::vector<LabeledPreamble> multipath_training_set(const Dataset& ds, int snr_index) {
  std::vector<LabeledPreamble> set;
  set.reserve(ds.train_ids.size() * ds.cfg.train_realizations);
  for (size_t rid : ds.train_ids) {
    for (int z = 0; z < ds.cfg.train_realizations; ++z) {
      set.push_back({iqnl_to_tensor(received_tensor(ds, rid, snr_index, z)),
                     ds.records[rid].emitter});
    }
  }
  return set;
}

std::vector<LabeledPreamble> clean_training_set(const Dataset& ds, int snr_index) {
  std::vector<LabeledPreamble> set;
  set.reserve(ds.train_ids.size() * ds.cfg.train_realizations);
  for (size_t rid : ds.train_ids) {
    for (int z = 0; z < ds.cfg.train_realizations; ++z) {
      set.push_back({iqnl_to_tensor(clean_tensor(ds, rid, snr_index, z)),
                     ds.records[rid].emitter});
    }
  }
  return set;
}

std::vector<JcaecnnRecord> jcaecnn_training_set(const Dataset& ds, int snr_index) {
  std::vector<JcaecnnRecord> set;
  set.reserve(ds.train_ids.size() * ds.cfg.train_realizations);
  for (size_t rid : ds.train_ids) {
    const DatasetRecord& rec = ds.records[rid];
    for (int z = 0; z < ds.cfg.train_realizations; ++z) {
      JcaecnnRecord jr;
      jr.input = iqnl_to_tensor(received_tensor(ds, rid, snr_index, z));
      jr.targets = make_path_targets(ds.clean[rec.emitter], rec.tdl, ds.stats);
      jr.label = rec.emitter;
      set.push_back(std::move(jr));
    }
  }
  return set;
}

std::vector<LabeledPreamble> cnnd_training_set(const Dataset& ds, int snr_index) {
  if (snr_index < 0 || static_cast<size_t>(snr_index) >= ds.cfg.snr_grid_db.size()) {
    throw std::out_of_range("dataset: snr index out of range");
  }
  const double snr_db = ds.cfg.snr_grid_db[snr_index];
  const uint64_t noise_base = derive_seed(ds.cfg.master_seed, kSeedCnnDNoise);
  std::vector<LabeledPreamble> set;
  set.reserve(ds.train_ids.size() * (ds.cfg.channel.L + 1));
  for (size_t rid : ds.train_ids) {
    const DatasetRecord& rec = ds.records[rid];
    const ComplexSignal& x = ds.clean[rec.emitter];
    const size_t n = x.samples.size();
    // the whole preamble (copy index 0), then each delayed, scaled component
    for (size_t k = 0; k <= rec.tdl.coeffs.size(); ++k) {
      ComplexSignal c;
      c.sample_rate_hz = x.sample_rate_hz;
      c.samples.assign(n, cplx{0.0, 0.0});
      if (k == 0) {
        c.samples = x.samples;
      } else {
        const cplx a = rec.tdl.coeffs[k - 1];
        const int tau = rec.tdl.delays[k - 1];
        for (size_t m = static_cast<size_t>(tau); m < n; ++m) {
          c.samples[m] = a * x.samples[m - tau];
        }
      }
      Rng rng(derive_seed(noise_base, rid * 64 + k));
      const ComplexSignal noisy = add_awgn(c, snr_db, rng);
      set.push_back({iqnl_to_tensor(minmax_normalize(to_iqnl(noisy), ds.stats)),
                     rec.emitter});
    }
  }
  return set;
}

// --- metrics --------------------------------------------------------------------

void PipelineCounters::add(const PipelineCounters& o) {
  decisions += o.decisions;
  estimations += o.estimations;
  equalizations += o.equalizations;
  classifications += o.classifications;
  votes += o.votes;
}

namespace {

MetricsRecord finalize_metrics(double snr_db, double train_snr_db,
                               std::vector<std::vector<int64_t>> conf, PipelineCounters c) {
  MetricsRecord m;
  m.snr_db = snr_db;
  m.train_snr_db = train_snr_db;
  m.confusion = std::move(conf);
  int64_t total = 0, hits = 0;
  m.per_class.assign(m.confusion.size(), 0.0);
  for (size_t i = 0; i < m.confusion.size(); ++i) {
    int64_t row = 0;
    for (int64_t v : m.confusion[i]) row += v;
    total += row;
    hits += m.confusion[i][i];
    m.per_class[i] = row > 0 ? static_cast<double>(m.confusion[i][i]) / row : 0.0;
  }
  m.decisions = total;
  m.accuracy = total > 0 ? static_cast<double>(hits) / total : 0.0;
  m.counters = c;
  validate_metrics(m);
  return m;
}

}  // namespace

void validate_metrics(const MetricsRecord& m) {
  const size_t n = m.confusion.size();
  if (n == 0) throw std::invalid_argument("metrics: empty confusion matrix");
  if (m.per_class.size() != n) throw std::invalid_argument("metrics: per_class size mismatch");
  int64_t total = 0, hits = 0;
  for (size_t i = 0; i < n; ++i) {
    if (m.confusion[i].size() != n) {
      throw std::invalid_argument("metrics: confusion matrix is not square");
    }
    int64_t row = 0;
    for (int64_t v : m.confusion[i]) {
      if (v < 0) throw std::invalid_argument("metrics: negative confusion count");
      row += v;
    }
    hits += m.confusion[i][i];
    total += row;
    const double pc = row > 0 ? static_cast<double>(m.confusion[i][i]) / row : 0.0;
    if (std::abs(pc - m.per_class[i]) > 1e-12) {
      throw std::invalid_argument("metrics: per_class inconsistent with confusion row");
    }
  }
  if (total != m.decisions) {
    throw std::invalid_argument("metrics: decisions != confusion total");
  }
  const double acc = total > 0 ? static_cast<double>(hits) / total : 0.0;
  if (std::abs(acc - m.accuracy) > 1e-12) {
    throw std::invalid_argument("metrics: accuracy inconsistent with confusion trace");
  }
  if (m.counters.decisions != m.decisions) {
    throw std::invalid_argument("metrics: counter decisions != confusion total");
  }
}

// --- model training ---------------------------------------------------------------

bool pipeline_requested(const std::string& which, const std::string& name) {
  return which == "all" || which == name;
}

HarnessModels train_models(const Dataset& ds, const std::string& which,
                           const std::string& curves_dir) {
  const ExperimentConfig& cfg = ds.cfg;
  const int n_cols = static_cast<int>(ds.clean[0].samples.size());
  HarnessModels m;

  if (pipeline_requested(which, "trad")) {
    m.awgn_cnn = build_classifier<float>(cfg.n_emitters, 4, n_cols);
    nn::TrainConfig tc = cfg.cls_train;
    tc.seed = derive_seed(cfg.master_seed, kSeedAwgnCnn);
    train_classifier(m.awgn_cnn, awgn_training_set(ds), tc);
    m.has_awgn_cnn = true;
  }

  if (pipeline_requested(which, "cgan")) {
    const uint64_t g_base = derive_seed(cfg.master_seed, kSeedCgan);
    const uint64_t c_base = derive_seed(cfg.master_seed, kSeedCganCls);
    for (size_t s = 0; s < cfg.snr_grid_db.size(); ++s) {
      const int si = static_cast<int>(s);
      const auto mp = multipath_training_set(ds, si);
      const auto cl = clean_training_set(ds, si);
      Cgan g = build_cgan(cfg.n_emitters, 4, n_cols);
      CganConfig cc = cfg.cgan;
      cc.seed = derive_seed(g_base, s);
      if (!curves_dir.empty()) {
        cc.curves_path =
            curves_dir + "/cgan_train_" + snr_label(cfg.snr_grid_db[s]) + "db.csv";
      }
      train_cgan(g, mp, cl, cc);

      // classifier learns on generator-equalized training data, true labels
      std::vector<LabeledPreamble> eq;
      eq.reserve(mp.size());
      for (const auto& rec : mp) {
        const IqNlTensor t = tensor_to_iqnl(rec.data);
        eq.push_back({iqnl_to_tensor(cgan_equalize(g, t, rec.label)), rec.label});
      }
      Classifier<float> cls = build_classifier<float>(cfg.n_emitters, 4, n_cols);
      nn::TrainConfig tc = cfg.cls_train;
      tc.seed = derive_seed(c_base, s);
      train_classifier(cls, eq, tc);

      m.cgans.push_back(std::move(g));
      m.cgan_cls.push_back(std::move(cls));
    }
  }

  const bool need_j = pipeline_requested(which, "jcaecnn");
  const bool need_o = pipeline_requested(which, "o-jcaecnn");
  if (need_j || need_o) {
    const int low = lowest_snr_index(cfg.snr_grid_db);
    const auto jset = jcaecnn_training_set(ds, low);
    if (need_j) {
      LossWeights w;
      w.lambda_k.assign(static_cast<size_t>(cfg.channel.L), 1.0);
      w.lambda_c = 1.0;
      nn::TrainConfig tc = cfg.jcaecnn_train;
      tc.seed = derive_seed(cfg.master_seed, kSeedJcae);
      m.jcae = train_jcaecnn(jset, w, tc, cfg.n_emitters, cfg.classifier_per_path);
      m.has_jcae = true;
    }
    if (need_o) {
      nn::TrainConfig tc = cfg.jcaecnn_train;
      tc.seed = derive_seed(cfg.master_seed, kSeedOJcae);
      m.o_jcae =
          train_jcaecnn(jset, o_weights(cfg.channel.L), tc, cfg.n_emitters, cfg.classifier_per_path);
      m.has_o_jcae = true;
    }
    m.cnn_d = build_classifier<float>(cfg.n_emitters, 4, n_cols);
    nn::TrainConfig tc = cfg.cls_train;
    tc.seed = derive_seed(cfg.master_seed, kSeedCnnD);
    train_classifier(m.cnn_d, cnnd_training_set(ds, low), tc);
    m.has_cnn_d = true;
  }
  return m;
}

// --- persistence ---------------------------------------------------------------------

namespace {

void adopt_params(nn::Graph<float>& dst, const std::string& path) {
  nn::Graph<float> src = nn::load_model<float>(path);
  if (dst.describe() != src.describe()) {
    throw std::runtime_error("model in '" + path + "' does not match the expected architecture");
  }
  auto& dp = dst.params();
  auto& sp = src.params();
  for (size_t i = 0; i < dp.size(); ++i) dp[i].value = std::move(sp[i].value);
}

}  // namespace

void save_models(const HarnessModels& m, const std::string& dir) {
  std::filesystem::create_directories(dir);
  if (m.has_awgn_cnn) nn::save_model(m.awgn_cnn.net, dir + "/awgn_cnn.rfnn");
  for (size_t s = 0; s < m.cgans.size(); ++s) {
    const std::string tag = std::to_string(s);
    nn::save_model(m.cgans[s].g.net, dir + "/cgan_g_" + tag + ".rfnn");
    nn::save_model(m.cgans[s].d.net, dir + "/cgan_d_" + tag + ".rfnn");
    nn::save_model(m.cgan_cls[s].net, dir + "/cgan_cls_" + tag + ".rfnn");
  }
  if (m.has_jcae) nn::save_model(m.jcae.net.net, dir + "/jcaecnn.rfnn");
  if (m.has_o_jcae) nn::save_model(m.o_jcae.net.net, dir + "/o_jcaecnn.rfnn");
  if (m.has_cnn_d) nn::save_model(m.cnn_d.net, dir + "/cnn_d.rfnn");
}

HarnessModels load_models(const Dataset& ds, const std::string& which, const std::string& dir) {
  const ExperimentConfig& cfg = ds.cfg;
  const int n_cols = static_cast<int>(ds.clean[0].samples.size());
  HarnessModels m;

  if (pipeline_requested(which, "trad")) {
    m.awgn_cnn = build_classifier<float>(cfg.n_emitters, 4, n_cols);
    adopt_params(m.awgn_cnn.net, dir + "/awgn_cnn.rfnn");
    m.has_awgn_cnn = true;
  }
  if (pipeline_requested(which, "cgan")) {
    for (size_t s = 0; s < cfg.snr_grid_db.size(); ++s) {
      const std::string tag = std::to_string(s);
      Cgan g = build_cgan(cfg.n_emitters, 4, n_cols);
      adopt_params(g.g.net, dir + "/cgan_g_" + tag + ".rfnn");
      adopt_params(g.d.net, dir + "/cgan_d_" + tag + ".rfnn");
      g.trained = true;
      Classifier<float> cls = build_classifier<float>(cfg.n_emitters, 4, n_cols);
      adopt_params(cls.net, dir + "/cgan_cls_" + tag + ".rfnn");
      m.cgans.push_back(std::move(g));
      m.cgan_cls.push_back(std::move(cls));
    }
  }
  const bool need_j = pipeline_requested(which, "jcaecnn");
  const bool need_o = pipeline_requested(which, "o-jcaecnn");
  if (need_j || need_o) {
    if (need_j) {
      m.jcae.net = build_jcaecnn<float>(cfg.n_emitters, cfg.channel.L, 4, n_cols);
      adopt_params(m.jcae.net.net, dir + "/jcaecnn.rfnn");
      m.jcae.weights.lambda_k.assign(static_cast<size_t>(cfg.channel.L), 1.0);
      m.jcae.weights.lambda_c = 1.0;
      m.jcae.classifier_per_path = cfg.classifier_per_path;
      m.jcae.trained = true;
      m.has_jcae = true;
    }
    if (need_o) {
      m.o_jcae.net = build_jcaecnn<float>(cfg.n_emitters, cfg.channel.L, 4, n_cols);
      adopt_params(m.o_jcae.net.net, dir + "/o_jcaecnn.rfnn");
      m.o_jcae.weights = o_weights(cfg.channel.L);
      m.o_jcae.classifier_per_path = cfg.classifier_per_path;
      m.o_jcae.trained = true;
      m.has_o_jcae = true;
    }
    m.cnn_d = build_classifier<float>(cfg.n_emitters, 4, n_cols);
    adopt_params(m.cnn_d.net, dir + "/cnn_d.rfnn");
    m.has_cnn_d = true;
  }
  return m;
}

// --- pipeline runners ------------------------------------------------------------------

PipelineResult run_traditional(const Dataset& ds, const Classifier<float>& awgn_cnn) {
  const ExperimentConfig& cfg = ds.cfg;
  const int n_cols = static_cast<int>(ds.clean[0].samples.size());
  const NmOptions opts{};
  const uint64_t cand_base = derive_seed(cfg.master_seed, kSeedCandidates);

  std::vector<std::vector<size_t>> train_by_emitter(cfg.n_emitters);
  for (size_t rid : ds.train_ids) train_by_emitter[ds.records[rid].emitter].push_back(rid);

  PipelineResult res;
  res.pipeline = "trad";
  for (size_t s = 0; s < cfg.snr_grid_db.size(); ++s) {
    const int si = static_cast<int>(s);
    const double snr_db = cfg.snr_grid_db[s];
    const double gamma = std::pow(10.0, snr_db / 10.0);
    std::vector<std::vector<int64_t>> conf(
        cfg.n_emitters, std::vector<int64_t>(cfg.n_emitters, 0));
    PipelineCounters c;

    for (size_t rid : ds.test_ids) {
      for (int z = 0; z < cfg.n_noise; ++z) {
        const ComplexSignal r = noisy_received(ds, rid, si, z);
        const uint64_t stream =
            (rid * static_cast<uint64_t>(cfg.n_noise) + z) * cfg.snr_grid_db.size() + s;
        Rng crng(derive_seed(cand_base, stream));

        // 5 distinct training preambles per emitter, noisy at the test SNR
        std::vector<ComplexSignal> candidates;
        candidates.reserve(static_cast<size_t>(cfg.n_emitters) * kCandidatesPerEmitter);
        std::vector<int> cand_emitter;
        for (int e = 0; e < cfg.n_emitters; ++e) {
          std::vector<size_t> pool = train_by_emitter[e];
          for (int j = 0; j < kCandidatesPerEmitter; ++j) {
            const size_t pick = j + crng.below(pool.size() - j);
            std::swap(pool[j], pool[pick]);
            const int zc = cfg.train_realizations == 1
                               ? 0
                               : static_cast<int>(crng.below(cfg.train_realizations));
            candidates.push_back(noisy_clean(ds, pool[j], si, zc));
            cand_emitter.push_back(e);
          }
        }

        std::vector<ChannelEstimate> ests;
        ests.reserve(candidates.size());
        for (const auto& cand : candidates) {
          ests.push_back(estimate_channel(r, cand, cfg.channel.L, opts));
          ++c.estimations;
        }
        const ChannelEstimate best = select_best(r, candidates, ests);

        TapDelayLine h;
        h.coeffs = best.coeffs;
        h.delays = best.delays;
        const ConvMatrix A = conv_matrix(h, n_cols);
        const ComplexSignal xhat = mmse_equalize(r, A, gamma);
        const IqNlTensor t = minmax_normalize(to_iqnl(xhat), ds.stats);
        const int pred = nn::argmax_label(classify_probs(awgn_cnn, t));
        ++c.classifications;

        ++conf[ds.records[rid].emitter][pred];
        ++c.decisions;
      }
    }
    MetricsRecord m = finalize_metrics(snr_db, -1.0, std::move(conf), c);
    res.totals.add(c);
    res.metrics.push_back(std::move(m));
  }
  return res;
}

namespace {

MetricsRecord eval_cgan_cell(const Dataset& ds, const Cgan& g, const Classifier<float>& cls,
                             double train_snr_db, int test_snr_index) {
  const ExperimentConfig& cfg = ds.cfg;
  std::vector<std::vector<int64_t>> conf(cfg.n_emitters,
                                         std::vector<int64_t>(cfg.n_emitters, 0));
  PipelineCounters c;
  for (size_t rid : ds.test_ids) {
    for (int z = 0; z < cfg.n_noise; ++z) {
      const IqNlTensor t = received_tensor(ds, rid, test_snr_index, z);
      std::vector<IqNlTensor> equalized;
      equalized.reserve(cfg.n_emitters);
      for (int y = 0; y < cfg.n_emitters; ++y) {
        equalized.push_back(cgan_equalize(g, t, y));
        ++c.equalizations;
      }
      const int pred = classify_confidence(cls, equalized);
      c.classifications += cfg.n_emitters;
      ++conf[ds.records[rid].emitter][pred];
      ++c.decisions;
    }
  }
  return finalize_metrics(cfg.snr_grid_db[test_snr_index], train_snr_db, std::move(conf), c);
}

}  // namespace

CganGrid evaluate_cgan_grid(const Dataset& ds, const std::vector<Cgan>& gs,
                            const std::vector<Classifier<float>>& cls) {
  const auto& grid = ds.cfg.snr_grid_db;
  if (gs.size() != grid.size() || cls.size() != grid.size()) {
    throw std::invalid_argument("cgan grid: expected one model per grid SNR");
  }
  CganGrid out;
  out.records.assign(grid.size(), std::vector<MetricsRecord>(grid.size()));

  auto index_of = [&grid](double snr) {
    const auto it = std::find(grid.begin(), grid.end(), snr);
    if (it == grid.end()) throw std::logic_error("cgan grid: snr not on the grid");
    return static_cast<size_t>(it - grid.begin());
  };
  auto builder = [&](double train_snr) -> std::function<double(double)> {
    const size_t r_i = index_of(train_snr);
    return [&, r_i, train_snr](double test_snr) {
      const size_t t_i = index_of(test_snr);
      out.records[r_i][t_i] =
          eval_cgan_cell(ds, gs[r_i], cls[r_i], train_snr, static_cast<int>(t_i));
      return out.records[r_i][t_i].accuracy;
    };
  };
  out.search = grid_search_train_snr(grid, grid, builder);
  return out;
}

PipelineResult run_cgan(const Dataset& ds, const std::vector<Cgan>& gs,
                        const std::vector<Classifier<float>>& cls) {
  CganGrid grid = evaluate_cgan_grid(ds, gs, cls);
  PipelineResult res;
  res.pipeline = "cgan";
  for (size_t t = 0; t < ds.cfg.snr_grid_db.size(); ++t) {
    const int best_r = grid.search.best_train_index_per_test[t];
    MetricsRecord m = std::move(grid.records[static_cast<size_t>(best_r)][t]);
    res.totals.add(m.counters);
    res.metrics.push_back(std::move(m));
  }
  return res;
}

PipelineResult run_jcaecnn(const Dataset& ds, const JcaecnnModel& model,
                           const Classifier<float>& cnn_d, const std::string& name) {
  const ExperimentConfig& cfg = ds.cfg;
  const double train_snr = cfg.snr_grid_db[static_cast<size_t>(lowest_snr_index(cfg.snr_grid_db))];
  PipelineResult res;
  res.pipeline = name;
  for (size_t s = 0; s < cfg.snr_grid_db.size(); ++s) {
    std::vector<std::vector<int64_t>> conf(cfg.n_emitters,
                                           std::vector<int64_t>(cfg.n_emitters, 0));
    PipelineCounters c;
    for (size_t rid : ds.test_ids) {
      for (int z = 0; z < cfg.n_noise; ++z) {
        const IqNlTensor t = received_tensor(ds, rid, static_cast<int>(s), z);
        const Decomposition d = decompose(model, t);
        const int pred = vote_classify(cnn_d, d.recon, d.internal_label);
        c.votes += static_cast<int64_t>(d.recon.size()) + 1;
        c.classifications += static_cast<int64_t>(d.recon.size());
        ++conf[ds.records[rid].emitter][pred];
        ++c.decisions;
      }
    }
    MetricsRecord m = finalize_metrics(cfg.snr_grid_db[s], train_snr, std::move(conf), c);
    res.totals.add(c);
    res.metrics.push_back(std::move(m));
  }
  return res;
}

std::vector<PipelineResult> run_pipelines(const Dataset& ds, const HarnessModels& models,
                                          const std::string& which) {
  std::vector<PipelineResult> out;
  if (pipeline_requested(which, "trad")) {
    if (!models.has_awgn_cnn) throw std::logic_error("run: traditional classifier not trained");
    out.push_back(run_traditional(ds, models.awgn_cnn));
  }
  if (pipeline_requested(which, "cgan")) {
    if (models.cgans.empty()) throw std::logic_error("run: cgan models not trained");
    out.push_back(run_cgan(ds, models.cgans, models.cgan_cls));
  }
  if (pipeline_requested(which, "jcaecnn")) {
    if (!models.has_jcae || !models.has_cnn_d) {
      throw std::logic_error("run: joint model not trained");
    }
    out.push_back(run_jcaecnn(ds, models.jcae, models.cnn_d, "jcaecnn"));
  }
  if (pipeline_requested(which, "o-jcaecnn")) {
    if (!models.has_o_jcae || !models.has_cnn_d) {
      throw std::logic_error("run: optimized joint model not trained");
    }
    out.push_back(run_jcaecnn(ds, models.o_jcae, models.cnn_d, "o-jcaecnn"));
  }
  return out;
}

}  // namespace rfdna
