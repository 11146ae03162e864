// rfdna: command-line driver for the fingerprinting workbench.
//
//   rfdna generate    synthesize a fleet + dataset and dump capture files
//   rfdna train       train the selected pipelines and save the models
//   rfdna evaluate    run the SNR sweep and write metric CSVs + plot
//   rfdna grid-search evaluate the cgan train-SNR x test-SNR matrix
//   rfdna report      render plot + summary from previously written metrics
//
// Every failure exits nonzero with a one-line JSON error on stderr.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rfdna/harness.hpp"

namespace fs = std::filesystem;
using namespace rfdna;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  uint64_t seed = 0;
  bool seed_set = false;
  bool full = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)");
  cmd->add_option("--seed", args.seed, "master seed override")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_flag("--full", args.full, "start from full-protocol defaults instead of desk scale");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
  const ExperimentConfig base =
      args.full ? ExperimentConfig::full_defaults() : ExperimentConfig::desk_defaults();
  ExperimentConfig cfg =
      args.config_path.empty() ? base : load_config_file(args.config_path, base);
  if (args.seed_set) cfg.master_seed = args.seed;
  cfg.validate();
  return cfg;
}

void dump_config(const ExperimentConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream out(out_dir + "/config.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + out_dir + "/config.json'");
  out << config_to_json(cfg);
}

void write_curve_csv(const std::vector<double>& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "epoch,loss\n";
  char buf[64];
  for (size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i + 1, curve[i]);
    out << buf;
  }
}

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int cmd_generate(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const Dataset ds = generate_dataset(cfg);
  dump_config(cfg, args.out_dir);
  const std::string cap_dir = args.out_dir + "/captures";
  fs::create_directories(cap_dir);

  for (size_t e = 0; e < ds.clean.size(); ++e) {
    CaptureMeta meta;
    meta.emitter_label = static_cast<uint32_t>(e);
    write_capture(cap_dir + "/clean_e" + std::to_string(e) + ".capt", ds.clean[e], meta);
  }
  for (size_t r = 0; r < ds.records.size(); ++r) {
    CaptureMeta meta;
    meta.emitter_label = static_cast<uint32_t>(ds.records[r].emitter);
    write_capture(cap_dir + "/record_" + std::to_string(r) + ".capt", ds.records[r].multipath,
                  meta);
  }
  std::ofstream split(args.out_dir + "/split.csv", std::ios::binary);
  if (!split) throw std::runtime_error("cannot write '" + args.out_dir + "/split.csv'");
  split << "record,emitter,preamble_index,train\n";
  for (size_t r = 0; r < ds.records.size(); ++r) {
    const auto& rec = ds.records[r];
    split << r << "," << rec.emitter << "," << rec.index << "," << (rec.train ? 1 : 0) << "\n";
  }
  std::cout << "wrote " << ds.clean.size() << " clean and " << ds.records.size()
            << " multipath captures to " << cap_dir << "\n";
  return 0;
}

void note_divergence(const HarnessModels& m) {
  if (m.has_jcae && m.jcae.diverged) {
    std::cout << "warning: joint model training diverged (" << m.jcae.divergence_note << ")\n";
  }
  if (m.has_o_jcae && m.o_jcae.diverged) {
    std::cout << "warning: optimized joint model training diverged (" << m.o_jcae.divergence_note
              << ")\n";
  }
}

int cmd_train(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const Dataset ds = generate_dataset(cfg);
  const std::string curves_dir = args.out_dir + "/curves";
  fs::create_directories(curves_dir);
  const HarnessModels models = train_models(ds, cfg.pipeline, curves_dir);
  note_divergence(models);
  if (models.has_jcae) write_curve_csv(models.jcae.loss_curve, curves_dir + "/jcaecnn_train.csv");
  if (models.has_o_jcae) {
    write_curve_csv(models.o_jcae.loss_curve, curves_dir + "/o_jcaecnn_train.csv");
  }
  save_models(models, args.out_dir + "/models");
  dump_config(cfg, args.out_dir);
  std::cout << "saved models to " << args.out_dir << "/models\n";
  return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& models_dir) {
  const ExperimentConfig cfg = resolve_config(args);
  const Dataset ds = generate_dataset(cfg);
  HarnessModels models;
  if (models_dir.empty()) {
    models = train_models(ds, cfg.pipeline);
    note_divergence(models);
  } else {
    models = load_models(ds, cfg.pipeline, models_dir);
  }
  const std::vector<PipelineResult> results = run_pipelines(ds, models, cfg.pipeline);
  report(results, args.out_dir);
  dump_config(cfg, args.out_dir);
  for (const auto& r : results) {
    for (const auto& m : r.metrics) {
      std::cout << r.pipeline << " @ " << fmt_num(m.snr_db)
                << " dB: accuracy " << fmt_num(m.accuracy) << " (" << m.decisions
                << " decisions)\n";
    }
  }
  std::cout << "metrics written to " << args.out_dir << "\n";
  return 0;
}

int cmd_grid_search(const CommonArgs& args, const std::string& models_dir) {
  const ExperimentConfig cfg = resolve_config(args);
  const Dataset ds = generate_dataset(cfg);
  HarnessModels models;
  if (models_dir.empty()) {
    models = train_models(ds, "cgan");
  } else {
    models = load_models(ds, "cgan", models_dir);
  }
  const CganGrid grid = evaluate_cgan_grid(ds, models.cgans, models.cgan_cls);
  fs::create_directories(args.out_dir);

  std::ofstream mat(args.out_dir + "/cgan_grid.csv", std::ios::binary);
  if (!mat) throw std::runtime_error("cannot write '" + args.out_dir + "/cgan_grid.csv'");
  mat << "train_snr_db,test_snr_db,accuracy\n";
  for (size_t r = 0; r < cfg.snr_grid_db.size(); ++r) {
    for (size_t t = 0; t < cfg.snr_grid_db.size(); ++t) {
      mat << fmt_num(cfg.snr_grid_db[r]) << "," << fmt_num(cfg.snr_grid_db[t]) << ","
          << fmt_num(grid.search.accuracy[r][t]) << "\n";
    }
  }
  std::ofstream best(args.out_dir + "/cgan_best.csv", std::ios::binary);
  if (!best) throw std::runtime_error("cannot write '" + args.out_dir + "/cgan_best.csv'");
  best << "test_snr_db,best_train_snr_db,accuracy\n";
  for (size_t t = 0; t < cfg.snr_grid_db.size(); ++t) {
    const size_t r = static_cast<size_t>(grid.search.best_train_index_per_test[t]);
    best << fmt_num(cfg.snr_grid_db[t]) << "," << fmt_num(cfg.snr_grid_db[r]) << ","
         << fmt_num(grid.search.accuracy[r][t]) << "\n";
  }
  dump_config(cfg, args.out_dir);
  std::cout << "grid written to " << args.out_dir << "/cgan_grid.csv\n";
  return 0;
}

int cmd_report(const CommonArgs& args, const std::string& metrics_dir_opt) {
  const std::string metrics_dir = metrics_dir_opt.empty() ? args.out_dir : metrics_dir_opt;
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(metrics_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 12 && name.substr(name.size() - 12) == "_metrics.csv") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw std::runtime_error("no *_metrics.csv files found in '" + metrics_dir + "'");
  }

  std::vector<PipelineResult> results;
  for (const std::string& path : files) {
    PipelineResult r;
    const std::string base = fs::path(path).filename().string();
    r.pipeline = base.substr(0, base.size() - 12);
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string snr, metric, value;
      if (!std::getline(ss, snr, ',') || !std::getline(ss, metric, ',') ||
          !std::getline(ss, value)) {
        throw std::runtime_error("malformed metrics row in '" + path + "': " + line);
      }
      if (metric != "accuracy") continue;
      MetricsRecord m;
      m.snr_db = std::stod(snr);
      m.accuracy = std::stod(value);
      r.metrics.push_back(std::move(m));
    }
    if (r.metrics.empty()) {
      throw std::runtime_error("no accuracy records in '" + path + "'");
    }
    results.push_back(std::move(r));
  }

  fs::create_directories(args.out_dir);
  write_accuracy_svg(results, args.out_dir + "/accuracy_vs_snr.svg");
  std::ofstream sum(args.out_dir + "/summary.csv", std::ios::binary);
  if (!sum) throw std::runtime_error("cannot write '" + args.out_dir + "/summary.csv'");
  sum << "pipeline,snr_db,accuracy\n";
  for (const auto& r : results) {
    for (const auto& m : r.metrics) {
      sum << r.pipeline << "," << fmt_num(m.snr_db) << "," << fmt_num(m.accuracy) << "\n";
    }
  }
  std::cout << "report written to " << args.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RF emitter fingerprinting workbench"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, grid_args, report_args;
  std::string eval_models, grid_models, report_metrics;

  CLI::App* gen = app.add_subcommand("generate", "synthesize fleet, channels, and captures");
  add_common(gen, gen_args);
  CLI::App* train = app.add_subcommand("train", "train pipeline models and save them");
  add_common(train, train_args);
  CLI::App* eval = app.add_subcommand("evaluate", "run the SNR sweep and write metrics");
  add_common(eval, eval_args);
  eval->add_option("--models", eval_models, "load models from this directory instead of training");
  CLI::App* grid = app.add_subcommand("grid-search", "cgan train-SNR selection matrix");
  add_common(grid, grid_args);
  grid->add_option("--models", grid_models, "load models from this directory instead of training");
  CLI::App* rep = app.add_subcommand("report", "render plot + summary from metric CSVs");
  add_common(rep, report_args);
  rep->add_option("--metrics", report_metrics, "directory holding *_metrics.csv (default: --out)");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_generate(gen_args);
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_evaluate(eval_args, eval_models);
    if (grid->parsed()) return cmd_grid_search(grid_args, grid_models);
    if (rep->parsed()) return cmd_report(report_args, report_metrics);
    throw std::runtime_error("no subcommand selected");
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
}
