#pragma once

#include <string>
#include <vector>

#include "pixie/mpm.hpp"
#include "pixie/predictor.hpp"

namespace pixie {

struct RmseResult {
  std::vector<double> per_frame;
  double mean = 0.0;
};

// RMSE_f = sqrt(mean_p |a_p - b_p|^2); particles are matched by index.
RmseResult trajectory_rmse(const mpm::Trajectory& a, const mpm::Trajectory& b);

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample stddev / sqrt(n); 0 when n == 1
};

struct MetricReport {
  std::vector<Metrics> scenes;
  MeanStderr mat_acc, mse_log_e, mse_nu, mse_log_rho, avg_cont_mse;
};

MeanStderr mean_stderr(const std::vector<double>& values);
MetricReport aggregate(const std::vector<Metrics>& per_scene);

std::string report_json(const MetricReport& report);
// Header "scene,mat_acc,mse_log_e,mse_nu,mse_log_rho,avg_cont_mse", one row
// per scene, then "mean" and "stderr" rows.
std::string report_csv(const MetricReport& report);
std::string rmse_json(const RmseResult& rmse);

}  // namespace pixie
