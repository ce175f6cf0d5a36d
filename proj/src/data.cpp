#include "pgnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "pgnn/error.hpp"
#include "pgnn/random.hpp"

namespace pgnn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::optional<int> RegressorSpec::output_index(int offset) const {
  const int row = nk + 1 - offset;
  if (row < 0 || row > na) return std::nullopt;
  return row;
}

std::optional<int> RegressorSpec::input_index(int lag) const {
  if (lag < 1 || lag > nb - 1) return std::nullopt;
  return na + lag;
}

void RegressorSpec::validate() const {
  if (na < 0 || nk < 0 || nb < 1) {
    throw InvalidArgument("RegressorSpec: need na >= 0, nb >= 1, nk >= 0 (got na=" +
                          std::to_string(na) + ", nb=" + std::to_string(nb) +
                          ", nk=" + std::to_string(nk) + ")");
  }
}

nlohmann::json to_json(const RegressorSpec& spec) {
  return {{"na", spec.na}, {"nb", spec.nb}, {"nk", spec.nk}};
}

RegressorSpec regressor_spec_from_json(const nlohmann::json& j) {
  RegressorSpec spec{j.at("na").get<int>(), j.at("nb").get<int>(), j.at("nk").get<int>()};
  spec.validate();
  return spec;
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

namespace {

double parse_double(const std::string& field, std::size_t line) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw InvalidArgument("log CSV line " + std::to_string(line) + ": cannot parse '" + field + "'");
  }
  return value;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

SignalLog read_log_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("log CSV: empty input");
  const auto header = split_csv(line);
  if (header.size() != 3 || trim(header[0]) != "t" || trim(header[1]) != "u" ||
      trim(header[2]) != "y") {
    throw InvalidArgument("log CSV: header must be 't,u,y'");
  }
  std::vector<double> t, u, y;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 3) {
      throw InvalidArgument("log CSV line " + std::to_string(line_no) + ": expected 3 fields");
    }
    t.push_back(parse_double(fields[0], line_no));
    u.push_back(parse_double(fields[1], line_no));
    y.push_back(parse_double(fields[2], line_no));
  }
  if (t.size() < 2) throw InvalidArgument("log CSV: need at least two samples");

  SignalLog log;
  log.t = Eigen::Map<VectorXd>(t.data(), static_cast<Index>(t.size()));
  log.u = Eigen::Map<VectorXd>(u.data(), static_cast<Index>(u.size()));
  log.y = Eigen::Map<VectorXd>(y.data(), static_cast<Index>(y.size()));
  log.ts = (log.t(log.size() - 1) - log.t(0)) / static_cast<double>(log.size() - 1);
  if (!(log.ts > 0.0)) throw InvalidArgument("log CSV: time must increase");
  for (Index k = 1; k < log.size(); ++k) {
    const double dt = log.t(k) - log.t(k - 1);
    if (std::abs(dt - log.ts) > 1e-6 * log.ts) {
      throw InvalidArgument("log CSV: non-uniform sampling at row " + std::to_string(k + 1));
    }
  }
  return log;
}

SignalLog read_log_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open log file " + path.string());
  return read_log_csv(in);
}

void write_log_csv(std::ostream& out, const SignalLog& log) {
  out << "t,u,y\n";
  for (Index k = 0; k < log.size(); ++k) {
    out << format_double(log.t(k)) << ',' << format_double(log.u(k)) << ','
        << format_double(log.y(k)) << '\n';
  }
}

void write_log_csv(const std::filesystem::path& path, const SignalLog& log) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write log file " + path.string());
  write_log_csv(out, log);
}

DataSet DataSet::subset(const std::vector<Index>& indices) const {
  DataSet out;
  out.spec = spec;
  out.ts = ts;
  out.regressors.resize(regressors.rows(), static_cast<Index>(indices.size()));
  out.targets.resize(static_cast<Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.regressors.col(static_cast<Index>(i)) = regressors.col(indices[i]);
    out.targets(static_cast<Index>(i)) = targets(indices[i]);
  }
  return out;
}

VectorXd regressor_at(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const VectorXd>& u,
                      const RegressorSpec& spec, Index k) {
  VectorXd phi(spec.size());
  for (int i = 0; i <= spec.na; ++i) phi(i) = y(k + spec.nk + 1 - i);
  for (int i = 1; i < spec.nb; ++i) phi(spec.na + i) = u(k - i);
  return phi;
}

DataSet build_regressors(const SignalLog& log, const RegressorSpec& spec) {
  spec.validate();
  if (log.u.size() != log.y.size()) throw InvalidArgument("build_regressors: u and y differ in length");
  const Index n = log.y.size();
  const Index k_first = std::max<Index>({0, spec.na - spec.nk - 1, spec.nb - 1});
  const Index k_last = n - 1 - (spec.nk + 1);
  if (k_last < k_first) {
    throw InvalidArgument("build_regressors: log of " + std::to_string(n) +
                          " samples is shorter than the regressor context (" +
                          std::to_string(k_first + spec.nk + 2) + " samples needed)");
  }
  DataSet ds;
  ds.spec = spec;
  ds.ts = log.ts;
  const Index count = k_last - k_first + 1;
  ds.regressors.resize(spec.size(), count);
  ds.targets.resize(count);
  for (Index i = 0; i < count; ++i) {
    const Index k = k_first + i;
    ds.regressors.col(i) = regressor_at(log.y, log.u, spec, k);
    ds.targets(i) = log.u(k);
  }
  return ds;
}

VectorXd apply_delta(const Eigen::Ref<const VectorXd>& signal, double ts, int order) {
  if (order < 1 || order > 2) throw InvalidArgument("apply_delta: order must be 1 or 2");
  if (signal.size() < 2 * order + 1) {
    throw InvalidArgument("apply_delta: need at least " + std::to_string(2 * order + 1) +
                          " samples");
  }
  VectorXd out = signal;
  for (int pass = 0; pass < order; ++pass) {
    const Index m = out.size() - 2;
    VectorXd next(m);
    for (Index i = 0; i < m; ++i) next(i) = (out(i + 2) - out(i)) / (2.0 * ts);
    out = std::move(next);
  }
  return out;
}

VectorXd apply_average(const Eigen::Ref<const VectorXd>& signal) {
  if (signal.size() < 2) throw InvalidArgument("apply_average: need at least 2 samples");
  const Index m = signal.size() - 1;
  return 0.5 * (signal.tail(m) + signal.head(m));
}

std::pair<DataSet, DataSet> split_train_val(const DataSet& ds, double fraction,
                                            std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidArgument("split_train_val: fraction must lie in (0, 1)");
  }
  const Index n = ds.size();
  const auto n_train = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) {
    throw InvalidArgument("split_train_val: a partition of " + std::to_string(n) +
                          " samples would be empty");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng = make_rng(seed, 0x5e11);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[bounded(rng, i + 1)]);
  }
  std::vector<Index> train(order.begin(), order.begin() + n_train);
  std::vector<Index> val(order.begin() + n_train, order.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {ds.subset(train), ds.subset(val)};
}

MatrixXd NormalizationRecord::apply(const Eigen::Ref<const MatrixXd>& x) const {
  if (empty()) return x;
  if (x.rows() != shift.size()) throw InvalidArgument("normalization: width mismatch");
  return (x.colwise() - shift).array().colwise() / scale.array();
}

MatrixXd NormalizationRecord::invert(const Eigen::Ref<const MatrixXd>& z) const {
  if (empty()) return z;
  if (z.rows() != shift.size()) throw InvalidArgument("normalization: width mismatch");
  return (z.array().colwise() * scale.array()).matrix().colwise() + shift;
}

NormalizationRecord NormalizationRecord::identity(Index n) {
  return {VectorXd::Zero(n), VectorXd::Ones(n)};
}

nlohmann::json to_json(const NormalizationRecord& rec) {
  return {{"shift", std::vector<double>(rec.shift.data(), rec.shift.data() + rec.shift.size())},
          {"scale", std::vector<double>(rec.scale.data(), rec.scale.data() + rec.scale.size())}};
}

NormalizationRecord normalization_from_json(const nlohmann::json& j) {
  const auto shift = j.at("shift").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  if (shift.size() != scale.size()) throw InvalidArgument("normalization: shift/scale length");
  NormalizationRecord rec;
  rec.shift = Eigen::Map<const VectorXd>(shift.data(), static_cast<Index>(shift.size()));
  rec.scale = Eigen::Map<const VectorXd>(scale.data(), static_cast<Index>(scale.size()));
  return rec;
}

NormalizationRecord fit_normalization(const Eigen::Ref<const MatrixXd>& features) {
  if (features.cols() < 2) throw InvalidArgument("fit_normalization: need at least 2 samples");
  NormalizationRecord rec;
  const double n = static_cast<double>(features.cols());
  rec.shift = features.rowwise().mean();
  rec.scale.resize(features.rows());
  for (Index r = 0; r < features.rows(); ++r) {
    const double var = (features.row(r).array() - rec.shift(r)).square().sum() / n;
    const double sd = std::sqrt(var);
    rec.scale(r) = sd > 0.0 ? sd : 1.0;
  }
  return rec;
}

std::pair<DataSet, NormalizationRecord> normalize_inputs(const DataSet& ds) {
  NormalizationRecord rec = fit_normalization(ds.regressors);
  DataSet out = ds;
  out.regressors = rec.apply(ds.regressors);
  return {std::move(out), std::move(rec)};
}

DataSet denormalize_inputs(const DataSet& ds, const NormalizationRecord& rec) {
  DataSet out = ds;
  out.regressors = rec.invert(ds.regressors);
  return out;
}

void write_regressors_csv(std::ostream& out, const DataSet& ds) {
  for (int i = 0; i <= ds.spec.na; ++i) out << "y(k" << (ds.spec.nk + 1 - i >= 0 ? "+" : "") << (ds.spec.nk + 1 - i) << "),";
  for (int i = 1; i < ds.spec.nb; ++i) out << "u(k-" << i << "),";
  out << "u(k)\n";
  for (Index c = 0; c < ds.size(); ++c) {
    for (Index r = 0; r < ds.regressors.rows(); ++r) out << format_double(ds.regressors(r, c)) << ',';
    out << format_double(ds.targets(c)) << '\n';
  }
}

nlohmann::json regressors_to_json(const DataSet& ds) {
  nlohmann::json samples = nlohmann::json::array();
  for (Index c = 0; c < ds.size(); ++c) {
    std::vector<double> phi(ds.regressors.col(c).data(),
                            ds.regressors.col(c).data() + ds.regressors.rows());
    samples.push_back({{"phi", phi}, {"u", ds.targets(c)}});
  }
  return {{"spec", to_json(ds.spec)}, {"ts", ds.ts}, {"samples", samples}};
}

}  // namespace pgnn
