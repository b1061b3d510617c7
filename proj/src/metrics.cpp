#include "lab/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lab {

using nlohmann::json;

const MetricPoint& MetricSeries::final_point() const {
  if (points.empty())
    throw std::runtime_error("series '" + name + "' is empty");
  return points.back();
}

const MetricSeries& RunResult::find(const std::string& name) const {
  for (const auto& s : series)
    if (s.name == name) return s;
  throw std::runtime_error("no series named '" + name + "'");
}

bool RunResult::has(const std::string& name) const {
  for (const auto& s : series)
    if (s.name == name) return true;
  return false;
}

MetricSeries aggregate_seeds(
    const std::string& name,
    const std::vector<std::vector<MetricPoint>>& runs) {
  MetricSeries out;
  out.name = name;
  if (runs.empty()) return out;
  const std::size_t len = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != len)
      throw std::runtime_error("aggregate_seeds: per-seed series lengths differ");
  for (std::size_t i = 0; i < len; ++i) {
    MetricPoint p;
    p.x = runs.front()[i].x;
    p.n_seeds = static_cast<int>(runs.size());
    double sum = 0.0;
    for (const auto& r : runs) {
      if (r[i].x != p.x)
        throw std::runtime_error("aggregate_seeds: x grids differ across seeds");
      sum += r[i].mean;
    }
    p.mean = sum / runs.size();
    double sq = 0.0;
    for (const auto& r : runs) sq += (r[i].mean - p.mean) * (r[i].mean - p.mean);
    p.std = runs.size() > 1 ? std::sqrt(sq / runs.size()) : 0.0;
    out.points.push_back(p);
  }
  return out;
}

std::string to_csv(const std::vector<MetricSeries>& series) {
  std::ostringstream os;
  os.precision(17);
  os << "series,x,mean,std,n_seeds\n";
  for (const auto& s : series)
    for (const auto& p : s.points)
      os << s.name << ',' << p.x << ',' << p.mean << ',' << p.std << ','
         << p.n_seeds << '\n';
  return os.str();
}

std::vector<MetricSeries> from_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line) || line != "series,x,mean,std,n_seeds")
    throw std::runtime_error("from_csv: missing or bad header");
  std::vector<MetricSeries> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, field;
    if (!std::getline(ls, name, ',')) throw std::runtime_error("from_csv: bad row");
    MetricPoint p;
    std::getline(ls, field, ','); p.x = std::stod(field);
    std::getline(ls, field, ','); p.mean = std::stod(field);
    std::getline(ls, field, ','); p.std = std::stod(field);
    std::getline(ls, field, ','); p.n_seeds = std::stoi(field);
    if (out.empty() || out.back().name != name) {
      out.push_back(MetricSeries{name, {}});
    }
    out.back().points.push_back(p);
  }
  return out;
}

namespace {

json series_to_json(const std::vector<MetricSeries>& series) {
  json arr = json::array();
  for (const auto& s : series) {
    json pts = json::array();
    for (const auto& p : s.points)
      pts.push_back({{"x", p.x}, {"mean", p.mean}, {"std", p.std},
                     {"n_seeds", p.n_seeds}});
    arr.push_back({{"name", s.name}, {"points", pts}});
  }
  return arr;
}

std::vector<MetricSeries> series_from_json(const json& arr) {
  std::vector<MetricSeries> out;
  for (const auto& s : arr) {
    MetricSeries ms;
    ms.name = s.at("name").get<std::string>();
    for (const auto& p : s.at("points")) {
      MetricPoint mp;
      mp.x = p.at("x").get<double>();
      mp.mean = p.at("mean").get<double>();
      mp.std = p.at("std").get<double>();
      mp.n_seeds = p.at("n_seeds").get<int>();
      ms.points.push_back(mp);
    }
    out.push_back(std::move(ms));
  }
  return out;
}

}  // namespace

void emit_metrics(const RunResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw std::runtime_error("emit_metrics: cannot create output dir " + out_dir);

  auto write_file = [&](const std::string& name, const std::string& content) {
    std::ofstream os(fs::path(out_dir) / name);
    if (!os) throw std::runtime_error("emit_metrics: cannot write " + name);
    os << content;
    if (!os) throw std::runtime_error("emit_metrics: write failed for " + name);
  };

  write_file("metrics.csv", to_csv(result.series));

  json j;
  j["experiment"] = result.experiment;
  j["config_hash"] = result.config_hash;
  j["seeds"] = result.seeds;
  j["series"] = series_to_json(result.series);
  j["artifacts"] = result.artifacts;
  write_file("result.json", j.dump(2) + "\n");

  json manifest;
  manifest["experiment"] = result.experiment;
  manifest["config"] = result.config_canonical;
  manifest["config_hash"] = result.config_hash;
  manifest["seeds"] = result.seeds;
  manifest["layout"] = result.layout_map;
  write_file("manifest.json", manifest.dump(2) + "\n");
}

RunResult load_result(const std::string& run_dir) {
  namespace fs = std::filesystem;
  std::ifstream rj(fs::path(run_dir) / "result.json");
  if (!rj) throw std::runtime_error("load_result: missing result.json in " + run_dir);
  json j = json::parse(rj);
  RunResult result;
  result.experiment = j.at("experiment").get<std::string>();
  result.config_hash = j.at("config_hash").get<std::uint64_t>();
  result.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  result.series = series_from_json(j.at("series"));
  if (j.contains("artifacts"))
    result.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
  std::ifstream mj(fs::path(run_dir) / "manifest.json");
  if (mj) {
    json m = json::parse(mj);
    result.config_canonical = m.value("config", "");
    result.layout_map = m.value("layout", "");
  }
  return result;
}

namespace {
std::vector<double> ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;  // average rank for ties
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  if (da == 0.0 || db == 0.0) return 0.0;
  return num / std::sqrt(da * db);
}
}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman: need two samples of equal size >= 2");
  return pearson(ranks(a), ranks(b));
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("loglog_slope: need >= 2 points");
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0)
      throw std::invalid_argument("loglog_slope: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const std::size_t n = lx.size();
  double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return num / den;
}

}  // namespace lab
