#pragma once

#include "lab/config.hpp"

#include <map>
#include <string>
#include <vector>

namespace lab {

struct MetricPoint {
  double x = 0.0;
  double mean = 0.0;
  double std = 0.0;
  int n_seeds = 1;
};

struct MetricSeries {
  std::string name;
  std::vector<MetricPoint> points;

  const MetricPoint& final_point() const;
  double final_mean() const { return final_point().mean; }
};

struct RunResult {
  std::string experiment;
  std::string config_canonical;
  std::uint64_t config_hash = 0;
  std::vector<std::uint64_t> seeds;
  std::string layout_map;  // empty for non-grid experiments
  std::vector<MetricSeries> series;
  std::map<std::string, std::string> artifacts;  // name -> file path

  const MetricSeries& find(const std::string& name) const;
  bool has(const std::string& name) const;
};

/// Aggregates per-seed series (identical x grids) into mean/std points.
MetricSeries aggregate_seeds(const std::string& name,
                             const std::vector<std::vector<MetricPoint>>& runs);

/// Writes metrics.csv ("series,x,mean,std,n_seeds"), result.json and
/// manifest.json into `out_dir`.
void emit_metrics(const RunResult& result, const std::string& out_dir);

/// Reloads a RunResult from a directory written by emit_metrics.
RunResult load_result(const std::string& run_dir);

std::string to_csv(const std::vector<MetricSeries>& series);
std::vector<MetricSeries> from_csv(const std::string& csv);

/// Spearman rank correlation between two equally long samples.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace lab
