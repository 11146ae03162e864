#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfdna/harness.hpp"

// All numeric output goes through snprintf with fixed format strings so two
// runs of the same experiment produce byte-identical files.

namespace rfdna {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string num(double v) { return fmt("%.10g", v); }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  return out;
}

std::string snr_file_label(double snr_db) { return fmt("%g", snr_db); }

}  // namespace

void write_metrics_csv(const PipelineResult& r, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "snr_db,metric,value\n";
  for (const MetricsRecord& m : r.metrics) {
    out << num(m.snr_db) << ",accuracy," << num(m.accuracy) << "\n";
    out << num(m.snr_db) << ",decisions," << num(static_cast<double>(m.decisions)) << "\n";
    out << num(m.snr_db) << ",train_snr_db," << num(m.train_snr_db) << "\n";
    for (size_t c = 0; c < m.per_class.size(); ++c) {
      out << num(m.snr_db) << ",class_" << c << "_accuracy," << num(m.per_class[c]) << "\n";
    }
  }
}

void write_confusion_csv(const MetricsRecord& m, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "true_label";
  for (size_t j = 0; j < m.confusion.size(); ++j) out << ",predicted_" << j;
  out << "\n";
  for (size_t i = 0; i < m.confusion.size(); ++i) {
    out << i;
    for (int64_t v : m.confusion[i]) out << "," << v;
    out << "\n";
  }
}

void write_accuracy_svg(const std::vector<PipelineResult>& results, const std::string& path) {
  // fixed palette, one polyline per pipeline, accuracy in [0,1] vs SNR
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  const double W = 640, H = 420;
  const double x0 = 64, x1 = W - 24, y0 = H - 48, y1 = 24;  // plot box

  double snr_min = 0.0, snr_max = 1.0;
  bool first = true;
  for (const auto& r : results) {
    for (const auto& m : r.metrics) {
      snr_min = first ? m.snr_db : std::min(snr_min, m.snr_db);
      snr_max = first ? m.snr_db : std::max(snr_max, m.snr_db);
      first = false;
    }
  }
  if (first) throw std::invalid_argument("svg: no metrics to plot");
  if (snr_max <= snr_min) snr_max = snr_min + 1.0;

  auto px = [&](double snr) {
    return x0 + (x1 - x0) * (snr - snr_min) / (snr_max - snr_min);
  };
  auto py = [&](double acc) { return y0 + (y1 - y0) * acc; };

  std::ofstream out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W) << "\" height=\""
      << num(H) << "\" viewBox=\"0 0 " << num(W) << " " << num(H) << "\">\n";
  out << "<rect width=\"" << num(W) << "\" height=\"" << num(H) << "\" fill=\"white\"/>\n";

  // gridlines + y labels every 0.1
  for (int i = 0; i <= 10; ++i) {
    const double acc = i / 10.0;
    const double y = py(acc);
    out << "<line x1=\"" << fmt("%.2f", x0) << "\" y1=\"" << fmt("%.2f", y) << "\" x2=\""
        << fmt("%.2f", x1) << "\" y2=\"" << fmt("%.2f", y)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << fmt("%.2f", x0 - 8) << "\" y=\"" << fmt("%.2f", y + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
        << fmt("%.1f", acc) << "</text>\n";
  }
  // x ticks at each observed SNR (first pipeline's grid)
  for (const auto& m : results[0].metrics) {
    const double x = px(m.snr_db);
    out << "<line x1=\"" << fmt("%.2f", x) << "\" y1=\"" << fmt("%.2f", y0) << "\" x2=\""
        << fmt("%.2f", x) << "\" y2=\"" << fmt("%.2f", y0 + 5)
        << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << fmt("%.2f", x) << "\" y=\"" << fmt("%.2f", y0 + 20)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
        << num(m.snr_db) << "</text>\n";
  }
  // axes
  out << "<line x1=\"" << fmt("%.2f", x0) << "\" y1=\"" << fmt("%.2f", y1) << "\" x2=\""
      << fmt("%.2f", x0) << "\" y2=\"" << fmt("%.2f", y0)
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << fmt("%.2f", x0) << "\" y1=\"" << fmt("%.2f", y0) << "\" x2=\""
      << fmt("%.2f", x1) << "\" y2=\"" << fmt("%.2f", y0)
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << fmt("%.2f", (x0 + x1) / 2) << "\" y=\"" << fmt("%.2f", H - 10)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">SNR (dB)"
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << fmt("%.2f", (y0 + y1) / 2)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 16 " << fmt("%.2f", (y0 + y1) / 2) << ")\">accuracy</text>\n";

  for (size_t p = 0; p < results.size(); ++p) {
    const char* color = kColors[p % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < results[p].metrics.size(); ++i) {
      const auto& m = results[p].metrics[i];
      if (i) out << " ";
      out << fmt("%.2f", px(m.snr_db)) << "," << fmt("%.2f", py(m.accuracy));
    }
    out << "\"/>\n";
    for (const auto& m : results[p].metrics) {
      out << "<circle cx=\"" << fmt("%.2f", px(m.snr_db)) << "\" cy=\""
          << fmt("%.2f", py(m.accuracy)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    // legend row
    const double ly = y1 + 16 + 16 * static_cast<double>(p);
    out << "<line x1=\"" << fmt("%.2f", x0 + 12) << "\" y1=\"" << fmt("%.2f", ly - 4)
        << "\" x2=\"" << fmt("%.2f", x0 + 36) << "\" y2=\"" << fmt("%.2f", ly - 4)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fmt("%.2f", x0 + 42) << "\" y=\"" << fmt("%.2f", ly)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << results[p].pipeline
        << "</text>\n";
  }
  out << "</svg>\n";
}

void report(const std::vector<PipelineResult>& results, const std::string& out_dir) {
  if (results.empty()) throw std::invalid_argument("report: no pipeline results");
  std::filesystem::create_directories(out_dir);
  for (const auto& r : results) {
    write_metrics_csv(r, out_dir + "/" + r.pipeline + "_metrics.csv");
    for (const auto& m : r.metrics) {
      write_confusion_csv(
          m, out_dir + "/" + r.pipeline + "_confusion_" + snr_file_label(m.snr_db) + "db.csv");
    }
  }
  write_accuracy_svg(results, out_dir + "/accuracy_vs_snr.svg");
}

}  // namespace rfdna
