#pragma once

// Experiment orchestration: fleet + dataset synthesis with lazy noise
// realization, per-pipeline training and evaluation over the SNR grid,
// decision-count instrumentation, and metric persistence.

#include <cstdint>
#include <string>
#include <vector>

#include "rfdna/cgan.hpp"
#include "rfdna/channel.hpp"
#include "rfdna/jcaecnn.hpp"
#include "rfdna/nn/train.hpp"
#include "rfdna/waveform.hpp"

namespace rfdna {

// --- master-seed fan-out ---------------------------------------------------
// Every random stream is derive_seed(master, offset) plus the documented
// per-item stage below; nothing draws from a shared global generator, so any
// component can be re-synthesized independently and reproducibly.
inline constexpr uint64_t kSeedFleet = 0x01;       // fleet profiles
inline constexpr uint64_t kSeedTdl = 0x02;         // then per record index
inline constexpr uint64_t kSeedNoise = 0x03;       // then per record index, then
                                                   // kind*1000000 + snr_index*1024 + realization
                                                   // (kind 0 = multipath, 1 = clean)
inline constexpr uint64_t kSeedSplit = 0x04;       // then per emitter
inline constexpr uint64_t kSeedAwgnCnn = 0x05;     // AWGN-only classifier training
inline constexpr uint64_t kSeedCgan = 0x06;        // then per train-SNR index
inline constexpr uint64_t kSeedCganCls = 0x07;     // then per train-SNR index
inline constexpr uint64_t kSeedJcae = 0x08;        // unit-weight model training
inline constexpr uint64_t kSeedOJcae = 0x09;       // optimized-weight model training
inline constexpr uint64_t kSeedCnnD = 0x0a;        // reconstruction classifier training
inline constexpr uint64_t kSeedCnnDNoise = 0x0b;   // then record*64 + copy index
inline constexpr uint64_t kSeedCandidates = 0x0c;  // then per (record, snr, realization)

struct ExperimentConfig {
  int n_emitters = 4;        // one of {4, 8, 16, 32}
  int n_preambles = 200;     // per emitter
  ChannelConfig channel{};   // L, T_r, T_s (seed field unused here)
  std::vector<double> snr_grid_db{9.0, 18.0, 30.0};
  int n_noise = 3;           // noise realizations per (preamble, SNR)
  double split_fraction = 0.9;
  int train_realizations = 1;  // realizations used for training (<= n_noise)
  uint64_t master_seed = 1;
  double sample_rate_hz = 20e6;
  std::string pipeline = "all";  // trad | cgan | jcaecnn | o-jcaecnn | all

  CganConfig cgan;
  nn::TrainConfig cls_train;      // classifier heads (AWGN CNN, CGAN CNN, CNN_D)
  nn::TrainConfig jcaecnn_train;  // joint model
  bool classifier_per_path = true;

  void validate() const;
  int n_train_per_emitter() const;
  int n_test_per_emitter() const;

  static ExperimentConfig desk_defaults();
  static ExperimentConfig full_defaults();
};

ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& base);
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::string& path, const ExperimentConfig& base);
ExperimentConfig load_config_file(const std::string& path);

// --- dataset ----------------------------------------------------------------

struct DatasetRecord {
  int emitter = 0;
  int index = 0;  // preamble index within the emitter
  bool train = false;
  TapDelayLine tdl;
  ComplexSignal multipath;  // noiseless channel output (len 320 + max tau)
  uint64_t noise_seed = 0;  // base of this record's noise streams
};

struct Dataset {
  ExperimentConfig cfg;
  std::vector<EmitterProfile> fleet;
  std::vector<ComplexSignal> clean;  // per-emitter impaired preamble (len 320)
  std::vector<DatasetRecord> records;
  std::vector<size_t> train_ids, test_ids;
  RowStats stats;  // frozen from the training split
};

Dataset generate_dataset(const ExperimentConfig& cfg);

// lazily synthesized noise realizations (pure functions of the seeds)
ComplexSignal noisy_received(const Dataset& ds, size_t record, int snr_index, int realization);
ComplexSignal noisy_clean(const Dataset& ds, size_t record, int snr_index, int realization);

// normalized 4 x 320 representations of the above
IqNlTensor received_tensor(const Dataset& ds, size_t record, int snr_index, int realization);
IqNlTensor clean_tensor(const Dataset& ds, size_t record, int snr_index, int realization);

// --- training-set assembly ---------------------------------------------------

std::vector<LabeledPreamble> awgn_training_set(const Dataset& ds);  // pooled over the grid
std::vector<LabeledPreamble> multipath_training_set(const Dataset& ds, int snr_index);
std::vector<LabeledPreamble> clean_training_set(const Dataset& ds, int snr_index);
std::vector<JcaecnnRecord> jcaecnn_training_set(const Dataset& ds, int snr_index);
std::vector<LabeledPreamble> cnnd_training_set(const Dataset& ds, int snr_index);

// --- metrics ------------------------------------------------------------------

struct PipelineCounters {
  int64_t decisions = 0;
  int64_t estimations = 0;      // channel estimations (traditional)
  int64_t equalizations = 0;    // generator invocations (cgan)
  int64_t classifications = 0;  // classifier evaluations on test decisions
  int64_t votes = 0;            // per-reconstruction + internal votes (jcaecnn)

  void add(const PipelineCounters& o);
};

struct MetricsRecord {
  double snr_db = 0.0;
  double train_snr_db = -1.0;  // SNR the deciding models were trained at; -1 = pooled
  double accuracy = 0.0;
  std::vector<double> per_class;
  std::vector<std::vector<int64_t>> confusion;  // [true][predicted]
  int64_t decisions = 0;
  PipelineCounters counters;
};

// checks accuracy == trace/total and row sums == per-class decision counts
void validate_metrics(const MetricsRecord& m);

struct PipelineResult {
  std::string pipeline;
  std::vector<MetricsRecord> metrics;  // one per test SNR, grid order
  PipelineCounters totals;
};

// --- models + runners ----------------------------------------------------------

struct HarnessModels {
  Classifier<float> awgn_cnn;              // traditional pipeline classifier
  bool has_awgn_cnn = false;
  std::vector<Cgan> cgans;                 // one per train SNR (grid order)
  std::vector<Classifier<float>> cgan_cls; // one per train SNR
  JcaecnnModel jcae;
  bool has_jcae = false;
  JcaecnnModel o_jcae;
  bool has_o_jcae = false;
  Classifier<float> cnn_d;                 // reconstruction-vote classifier
  bool has_cnn_d = false;
};

bool pipeline_requested(const std::string& which, const std::string& name);

// Trains exactly the models `which` needs ("trad", "cgan", "jcaecnn",
// "o-jcaecnn", or "all"). curves_dir, when non-empty, receives training-curve
// CSVs.
HarnessModels train_models(const Dataset& ds, const std::string& which,
                           const std::string& curves_dir = "");

void save_models(const HarnessModels& models, const std::string& dir);
HarnessModels load_models(const Dataset& ds, const std::string& which, const std::string& dir);

PipelineResult run_traditional(const Dataset& ds, const Classifier<float>& awgn_cnn);

struct CganGrid {
  GridSearchResult search;
  std::vector<std::vector<MetricsRecord>> records;  // [train snr][test snr]
};

CganGrid evaluate_cgan_grid(const Dataset& ds, const std::vector<Cgan>& gs,
                            const std::vector<Classifier<float>>& cls);
PipelineResult run_cgan(const Dataset& ds, const std::vector<Cgan>& gs,
                        const std::vector<Classifier<float>>& cls);

PipelineResult run_jcaecnn(const Dataset& ds, const JcaecnnModel& model,
                           const Classifier<float>& cnn_d, const std::string& name);

std::vector<PipelineResult> run_pipelines(const Dataset& ds, const HarnessModels& models,
                                          const std::string& which);

// --- reporting -------------------------------------------------------------------

void write_metrics_csv(const PipelineResult& r, const std::string& path);
void write_confusion_csv(const MetricsRecord& m, const std::string& path);
void write_accuracy_svg(const std::vector<PipelineResult>& results, const std::string& path);

// writes <pipeline>_metrics.csv, <pipeline>_confusion_<snr>db.csv, and
// accuracy_vs_snr.svg under out_dir (created if missing)
void report(const std::vector<PipelineResult>& results, const std::string& out_dir);

}  // namespace rfdna
