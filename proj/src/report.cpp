#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "fcnbc/rollout.hpp"

namespace fcnbc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream out(path, mode);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

void write_metric_csv(const EvalReport& rep, MetricKind k, const fs::path& path) {
  const auto a = rep.aggregate(k);
  auto out = open_out(path);
  out << "iteration,mean,std,min,max";
  for (std::size_t c = 0; c < rep.cases.size(); ++c) out << ",case_" << c;
  out << '\n';
  for (std::size_t t = 0; t < a.mean.size(); ++t) {
    out << t + 1 << ',' << fmt(a.mean[t]) << ',' << fmt(a.std[t]) << ',' << fmt(a.min[t]) << ',' << fmt(a.max[t]);
    for (const auto& c : rep.cases) {
      const auto& s = c.metric(k);
      out << ',';
      if (t < s.size()) out << fmt(s[t]);
    }
    out << '\n';
  }
}

std::pair<std::string, std::string> split_label(const std::string& label) {
  const auto plus = label.rfind('+');
  if (plus == std::string::npos) return {label, ""};
  return {label.substr(0, plus), label.substr(plus + 1)};
}

std::string table_header() {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-16s %-10s %12s %12s %12s %9s\n", "method", "padding", "min", "max", "avg",
                "diverged");
  return buf;
}

std::string table_row(const std::string& label, double lo, double hi, double avg, Index diverged, Index cases) {
  const auto [method, padding] = split_label(label);
  const bool all = diverged == cases;
  const std::string smin = all ? "inf" : fmt(lo);
  const std::string smax = diverged > 0 ? "inf" : fmt(hi);
  const std::string savg = all ? "inf" : fmt(avg);
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-16s %-10s %12s %12s %12s %5lld/%-3lld\n", method.c_str(), padding.c_str(),
                smin.c_str(), smax.c_str(), savg.c_str(), static_cast<long long>(diverged),
                static_cast<long long>(cases));
  return buf;
}

}  // namespace

void write_pgm(const Field2F& f, double lo, double hi, const fs::path& path) {
  auto out = open_out(path, std::ios::binary | std::ios::trunc);
  out << "P5\n" << f.cols() << ' ' << f.rows() << "\n255\n";
  const double span = hi - lo;
  std::string pixels(static_cast<std::size_t>(f.size()), '\0');
  for (Index i = 0; i < f.rows(); ++i) {
    for (Index j = 0; j < f.cols(); ++j) {
      double v = span > 0.0 ? (static_cast<double>(f(i, j)) - lo) / span : 0.5;
      if (!std::isfinite(v)) v = 0.0;
      v = std::min(1.0, std::max(0.0, v));
      pixels[static_cast<std::size_t>(i * f.cols() + j)] = static_cast<char>(std::lround(v * 255.0));
    }
  }
  out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
}

void export_report(const EvalReport& rep, const fs::path& out_dir, const ExportOptions& options) {
  fs::create_directories(out_dir);
  for (MetricKind k : kAllMetrics) {
    write_metric_csv(rep, k, out_dir / ("metric_" + std::string(to_string(k)) + ".csv"));
  }

  const Index h = rep.config.horizon;
  std::vector<Index> snaps = options.snapshot_iterations;
  if (snaps.empty()) snaps = {1, std::max<Index>(1, h / 2), h};
  bool any_frames = false;
  for (const auto& c : rep.cases) any_frames = any_frames || !c.truth.empty();
  if (any_frames) {
    const fs::path dir = out_dir / "snapshots";
    fs::create_directories(dir);
    for (std::size_t ci = 0; ci < rep.cases.size(); ++ci) {
      const auto& c = rep.cases[ci];
      for (Index it : snaps) {
        if (it < 1 || it > static_cast<Index>(c.truth.size())) continue;
        const Field2F& g = c.truth[static_cast<std::size_t>(it - 1)];
        const double lo = g.minCoeff();
        const double hi = g.maxCoeff();
        char name[64];
        std::snprintf(name, sizeof(name), "case%02zu_it%04lld_truth.pgm", ci, static_cast<long long>(it));
        write_pgm(g, lo, hi, dir / name);
        if (it <= static_cast<Index>(c.predictions.size())) {
          std::snprintf(name, sizeof(name), "case%02zu_it%04lld_pred.pgm", ci, static_cast<long long>(it));
          write_pgm(c.predictions[static_cast<std::size_t>(it - 1)], lo, hi, dir / name);
        }
      }
    }
  }

  if (options.write_frames) {
    for (std::size_t ci = 0; ci < rep.cases.size(); ++ci) {
      const auto& c = rep.cases[ci];
      if (c.predictions.empty()) continue;
      SimulationRecord r;
      r.frames = c.predictions;
      r.pulses = c.pulses;
      char name[64];
      std::snprintf(name, sizeof(name), "rollout_case%02zu.rec", ci);
      write_record(r, out_dir / name);
    }
  }

  const Index n = static_cast<Index>(rep.cases.size());
  const Index div = rep.diverged_count();
  const MetricKind primary = rep.config.primary_metric;
  const auto fin = rep.final_values(primary);

  auto txt = open_out(out_dir / "summary.txt");
  txt << "metric " << to_string(primary) << " at iteration " << h << '\n';
  txt << table_header() << table_row(rep.label, fin.min, fin.max, fin.avg, div, n);

  json finals = json::object();
  for (MetricKind k : kAllMetrics) {
    const auto f = rep.final_values(k);
    finals[std::string(to_string(k))] = {{"min", number_or_null(f.min)}, {"max", number_or_null(f.max)},
                                         {"avg", number_or_null(f.avg)}};
  }
  json divergences = json::array();
  for (const auto& c : rep.cases) divergences.push_back(c.divergence_index ? json(*c.divergence_index) : json(nullptr));
  const json summary{{"label", rep.label},
                     {"primary_metric", to_string(primary)},
                     {"horizon", h},
                     {"cases", n},
                     {"diverged", div},
                     {"divergence_iterations", divergences},
                     {"final", finals}};
  open_out(out_dir / "summary.json") << summary.dump(2) << '\n';
}

std::string merge_reports(std::span<const fs::path> run_dirs) {
  if (run_dirs.empty()) throw ConfigError("report: no run directories given");
  std::ostringstream out;
  std::string metric;
  std::string rows;
  for (const auto& dir : run_dirs) {
    const fs::path path = dir / "summary.json";
    std::ifstream in(path);
    if (!in) throw Error("missing metric file " + path.string());
    json s;
    try {
      s = json::parse(in);
      const std::string m = s.at("primary_metric").get<std::string>();
      if (metric.empty()) metric = m;
      const auto& f = s.at("final").at(m);
      auto num = [](const json& v) { return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>(); };
      rows += table_row(s.at("label").get<std::string>(), num(f.at("min")), num(f.at("max")), num(f.at("avg")),
                        s.at("diverged").get<Index>(), s.at("cases").get<Index>());
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  out << "metric " << metric << " at final iteration\n" << table_header() << rows;
  return out.str();
}

}  // namespace fcnbc
