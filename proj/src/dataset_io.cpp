#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kf/config.hpp"
#include "kf/error.hpp"
#include "kf/sdre.hpp"

namespace kf {

std::string format_double(double x) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

namespace {

std::string timestamp_utc() {
  std::time_t t;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env != nullptr && *env != '\0') {
    t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void append_row(std::string& line, const Eigen::Ref<const Vector>& v) {
  for (Index k = 0; k < v.size(); ++k) {
    line += ',';
    line += format_double(v(k));
  }
}

std::vector<double> parse_row(const std::string& line, std::size_t lineno) {
  std::vector<double> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p <= end) {
    const char* comma = std::find(p, end, ',');
    double v = 0.0;
    auto [q, ec] = std::from_chars(p, comma, v);
    if (ec != std::errc{} || q != comma) {
      throw ConfigError("dataset line " + std::to_string(lineno) + ": bad number '" + std::string(p, comma) + "'");
    }
    out.push_back(v);
    p = comma + 1;
  }
  return out;
}

}  // namespace

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  const int kappa = data.spec.state_dim();
  const int mu = data.spec.control_dim();
  std::string line;
  for (int k = 1; k <= kappa; ++k) line += (k > 1 ? ",s_" : "s_") + std::to_string(k);
  line += ",dt";
  for (int k = 1; k <= mu; ++k) line += ",u_" + std::to_string(k);
  for (int k = 1; k <= kappa; ++k) line += ",sp_" + std::to_string(k);
  os << line << '\n';
  for (const DataRecord& r : data.records) {
    line.clear();
    for (Index k = 0; k < r.state.size(); ++k) {
      if (k > 0) line += ',';
      line += format_double(r.state(k));
    }
    line += ',';
    line += format_double(r.dt);
    append_row(line, r.control);
    append_row(line, r.next_state);
    os << line << '\n';
  }
  if (!os) throw Error("write failed: " + path.string());
}

void write_dataset_metadata(const std::filesystem::path& path, const Dataset& data) {
  nlohmann::ordered_json j;
  j["format"] = "kf-dataset";
  j["version"] = 1;
  j["model"] = model_spec_to_json(data.spec);
  j["n_samples"] = data.config.n_samples;
  j["dt_range"] = {data.config.dt_lo, data.config.dt_hi};
  j["seed"] = data.config.seed;
  j["train_fraction"] = data.config.train_fraction;
  j["update_rule"] = data.config.rule == UpdateRule::Discrete ? "discrete" : "literal_algorithm";
  j["dare"] = {{"tol", data.config.dare.tol},
               {"max_iter", data.config.dare.max_iter},
               {"method", data.config.dare.method == DareMethod::Doubling ? "doubling" : "fixed_point"}};
  j["failures"] = data.failures;
  j["generated_at"] = timestamp_utc();
  j["train_indices"] = data.train_indices;
  j["val_indices"] = data.val_indices;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << j.dump(1) << '\n';
}

DatasetTable read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open dataset " + path.string());
  std::string header;
  if (!std::getline(is, header) || header.empty()) throw ConfigError("dataset " + path.string() + " is empty");

  int kappa = 0, mu = 0, n_dt = 0;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (col.rfind("s_", 0) == 0) ++kappa;
      else if (col.rfind("u_", 0) == 0) ++mu;
      else if (col == "dt") ++n_dt;
      else if (col.rfind("sp_", 0) != 0) throw ConfigError("dataset header: unexpected column '" + col + "'");
    }
  }
  if (kappa == 0 || mu == 0 || n_dt != 1) throw ConfigError("dataset header malformed: " + header);
  const std::size_t width = static_cast<std::size_t>(2 * kappa + 1 + mu);

  std::vector<double> flat;
  std::string line;
  std::size_t lineno = 1;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row = parse_row(line, lineno);
    if (row.size() != width) {
      throw ConfigError("dataset line " + std::to_string(lineno) + ": expected " + std::to_string(width) +
                        " columns, got " + std::to_string(row.size()));
    }
    flat.insert(flat.end(), row.begin(), row.end());
    ++n;
  }
  if (n == 0) throw ConfigError("dataset " + path.string() + " has no records");

  DatasetTable t;
  t.kappa = kappa;
  t.mu = mu;
  t.inputs.resize(static_cast<Index>(n), kappa + 1);
  t.controls.resize(static_cast<Index>(n), mu);
  t.next_states.resize(static_cast<Index>(n), kappa);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = flat.data() + i * width;
    const Index ii = static_cast<Index>(i);
    for (int k = 0; k <= kappa; ++k) t.inputs(ii, k) = r[k];
    for (int k = 0; k < mu; ++k) t.controls(ii, k) = r[kappa + 1 + k];
    for (int k = 0; k < kappa; ++k) t.next_states(ii, k) = r[kappa + 1 + mu + k];
  }
  return t;
}

DatasetTable to_table(const Dataset& data) {
  DatasetTable t;
  t.kappa = data.spec.state_dim();
  t.mu = data.spec.control_dim();
  const Index n = static_cast<Index>(data.records.size());
  t.inputs.resize(n, t.kappa + 1);
  t.controls.resize(n, t.mu);
  t.next_states.resize(n, t.kappa);
  for (Index i = 0; i < n; ++i) {
    const DataRecord& r = data.records[static_cast<std::size_t>(i)];
    t.inputs.row(i).head(t.kappa) = r.state.transpose();
    t.inputs(i, t.kappa) = r.dt;
    t.controls.row(i) = r.control.transpose();
    t.next_states.row(i) = r.next_state.transpose();
  }
  return t;
}

DatasetSplit read_dataset_split(const std::filesystem::path& metadata_path) {
  std::ifstream is(metadata_path);
  if (!is) throw ConfigError("cannot open dataset metadata " + metadata_path.string());
  nlohmann::json j;
  try {
    is >> j;
    DatasetSplit s;
    s.train = j.at("train_indices").get<std::vector<std::size_t>>();
    s.val = j.at("val_indices").get<std::vector<std::size_t>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("dataset metadata " + metadata_path.string() + ": " + e.what());
  }
}

}  // namespace kf
