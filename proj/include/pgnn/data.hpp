#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

namespace pgnn {

/// Orders of the forward dynamics y(k) = h(y(k-1..k-na), u(k-nk-1..k-nk-nb)).
///
/// The inverse regressor built from these orders is
///   phi(k) = [y(k+nk+1), ..., y(k+nk-na+1), u(k-1), ..., u(k-nb+1)]
/// so it carries na+1 output samples and nb-1 past inputs, na+nb entries in total.
struct RegressorSpec {
  int na = 0;
  int nb = 1;
  int nk = 0;

  int output_terms() const { return na + 1; }
  int input_terms() const { return nb - 1; }
  int size() const { return na + nb; }

  /// Row of y(k+offset) inside the regressor, if the window contains it.
  std::optional<int> output_index(int offset) const;
  /// Row of u(k-lag) inside the regressor, lag >= 1.
  std::optional<int> input_index(int lag) const;

  /// Newest and oldest output offsets relative to k.
  int newest_output_offset() const { return nk + 1; }
  int oldest_output_offset() const { return nk - na + 1; }

  void validate() const;

  friend bool operator==(const RegressorSpec&, const RegressorSpec&) = default;
};

nlohmann::json to_json(const RegressorSpec& spec);
RegressorSpec regressor_spec_from_json(const nlohmann::json& j);

/// Uniformly sampled input/output record.
struct SignalLog {
  double ts = 0.0;
  Eigen::VectorXd t;
  Eigen::VectorXd u;
  Eigen::VectorXd y;

  Eigen::Index size() const { return t.size(); }
};

SignalLog read_log_csv(std::istream& in);
SignalLog read_log_csv(const std::filesystem::path& path);
void write_log_csv(std::ostream& out, const SignalLog& log);
void write_log_csv(const std::filesystem::path& path, const SignalLog& log);

/// Regressor/target pairs. Regressors are stored one sample per column.
struct DataSet {
  RegressorSpec spec;
  double ts = 0.0;
  Eigen::MatrixXd regressors;  // spec.size() x N
  Eigen::VectorXd targets;     // N

  Eigen::Index size() const { return targets.size(); }
  DataSet subset(const std::vector<Eigen::Index>& indices) const;
};

/// Drops boundary samples that lack a complete regressor window.
DataSet build_regressors(const SignalLog& log, const RegressorSpec& spec);

/// Inverse regressor at sample k of raw signals; k must have full context.
Eigen::VectorXd regressor_at(const Eigen::Ref<const Eigen::VectorXd>& y,
                             const Eigen::Ref<const Eigen::VectorXd>& u,
                             const RegressorSpec& spec, Eigen::Index k);

/// Central difference delta = (q - q^-1) / (2 ts), applied `order` times.
/// Output element i corresponds to input sample i + order.
Eigen::VectorXd apply_delta(const Eigen::Ref<const Eigen::VectorXd>& signal, double ts,
                            int order = 1);

/// Half-sample average Delta = (q + 1) / 2. Output element i is (s(i+1) + s(i)) / 2.
Eigen::VectorXd apply_average(const Eigen::Ref<const Eigen::VectorXd>& signal);

/// Disjoint random partition; the first part has round(fraction * N) samples.
std::pair<DataSet, DataSet> split_train_val(const DataSet& ds, double fraction = 0.7,
                                            std::uint64_t seed = 0);

/// Per-coordinate affine map x -> (x - shift) / scale.
struct NormalizationRecord {
  Eigen::VectorXd shift;
  Eigen::VectorXd scale;

  bool empty() const { return shift.size() == 0; }
  Eigen::Index size() const { return shift.size(); }
  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
  Eigen::MatrixXd invert(const Eigen::Ref<const Eigen::MatrixXd>& z) const;

  static NormalizationRecord identity(Eigen::Index n);
};

nlohmann::json to_json(const NormalizationRecord& rec);
NormalizationRecord normalization_from_json(const nlohmann::json& j);

/// Zero mean, unit population variance per row. Constant rows keep scale 1.
NormalizationRecord fit_normalization(const Eigen::Ref<const Eigen::MatrixXd>& features);

std::pair<DataSet, NormalizationRecord> normalize_inputs(const DataSet& ds);
DataSet denormalize_inputs(const DataSet& ds, const NormalizationRecord& rec);

void write_regressors_csv(std::ostream& out, const DataSet& ds);
nlohmann::json regressors_to_json(const DataSet& ds);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace pgnn
