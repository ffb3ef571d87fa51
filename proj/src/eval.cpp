#include "pixie/eval.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace pixie {

namespace {

std::string fixed(double v) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

nlohmann::ordered_json metrics_json(const Metrics& m) {
  return {{"mat_acc", m.mat_acc},
          {"mse_log_e", m.mse_log_e},
          {"mse_nu", m.mse_nu},
          {"mse_log_rho", m.mse_log_rho},
          {"avg_cont_mse", m.avg_cont_mse}};
}

nlohmann::ordered_json stat_json(const MeanStderr& s) { return {{"mean", s.mean}, {"stderr", s.stderr_}}; }

}  // namespace

RmseResult trajectory_rmse(const mpm::Trajectory& a, const mpm::Trajectory& b) {
  if (a.frame_count() != b.frame_count()) {
    throw Error(ErrorCode::DimensionMismatch, "trajectories differ in frame count: " + std::to_string(a.frame_count()) +
                                                  " vs " + std::to_string(b.frame_count()));
  }
  RmseResult out;
  out.per_frame.reserve(a.frame_count());
  for (std::size_t f = 0; f < a.frame_count(); ++f) {
    const auto& fa = a.positions[f];
    const auto& fb = b.positions[f];
    if (fa.size() != fb.size()) {
      throw Error(ErrorCode::DimensionMismatch, "frame " + std::to_string(f) + " differs in particle count");
    }
    double sum = 0.0;
    for (std::size_t p = 0; p < fa.size(); ++p) sum += (fa[p] - fb[p]).squaredNorm();
    out.per_frame.push_back(fa.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(fa.size())));
  }
  double total = 0.0;
  for (double r : out.per_frame) total += r;
  out.mean = out.per_frame.empty() ? 0.0 : total / static_cast<double>(out.per_frame.size());
  return out;
}

MeanStderr mean_stderr(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "aggregate needs at least one scene");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  MeanStderr out;
  out.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

MetricReport aggregate(const std::vector<Metrics>& per_scene) {
  if (per_scene.empty()) throw Error(ErrorCode::InvalidArgument, "aggregate needs at least one scene");
  MetricReport r;
  r.scenes = per_scene;
  auto column = [&](double Metrics::*field) {
    std::vector<double> v;
    v.reserve(per_scene.size());
    for (const auto& m : per_scene) v.push_back(m.*field);
    return mean_stderr(v);
  };
  r.mat_acc = column(&Metrics::mat_acc);
  r.mse_log_e = column(&Metrics::mse_log_e);
  r.mse_nu = column(&Metrics::mse_nu);
  r.mse_log_rho = column(&Metrics::mse_log_rho);
  r.avg_cont_mse = column(&Metrics::avg_cont_mse);
  return r;
}

std::string report_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["scene_count"] = report.scenes.size();
  nlohmann::ordered_json summary;
  summary["mat_acc"] = stat_json(report.mat_acc);
  summary["mse_log_e"] = stat_json(report.mse_log_e);
  summary["mse_nu"] = stat_json(report.mse_nu);
  summary["mse_log_rho"] = stat_json(report.mse_log_rho);
  summary["avg_cont_mse"] = stat_json(report.avg_cont_mse);
  j["summary"] = summary;
  j["scenes"] = nlohmann::ordered_json::array();
  for (const auto& m : report.scenes) j["scenes"].push_back(metrics_json(m));
  return j.dump(2) + "\n";
}

std::string report_csv(const MetricReport& report) {
  std::string out = "scene,mat_acc,mse_log_e,mse_nu,mse_log_rho,avg_cont_mse\n";
  auto row = [&](const std::string& label, double a, double b, double c, double d, double e) {
    out += label + ',' + fixed(a) + ',' + fixed(b) + ',' + fixed(c) + ',' + fixed(d) + ',' + fixed(e) + '\n';
  };
  for (std::size_t i = 0; i < report.scenes.size(); ++i) {
    const auto& m = report.scenes[i];
    row(std::to_string(i), m.mat_acc, m.mse_log_e, m.mse_nu, m.mse_log_rho, m.avg_cont_mse);
  }
  row("mean", report.mat_acc.mean, report.mse_log_e.mean, report.mse_nu.mean, report.mse_log_rho.mean,
      report.avg_cont_mse.mean);
  row("stderr", report.mat_acc.stderr_, report.mse_log_e.stderr_, report.mse_nu.stderr_, report.mse_log_rho.stderr_,
      report.avg_cont_mse.stderr_);
  return out;
}

std::string rmse_json(const RmseResult& rmse) {
  nlohmann::ordered_json j;
  j["frames"] = rmse.per_frame.size();
  j["mean_rmse"] = rmse.mean;
  j["per_frame_rmse"] = rmse.per_frame;
  return j.dump(2) + "\n";
}

}  // namespace pixie
