#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace drmatch {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Treatment = Eigen::VectorXi;

std::string version();

// Error taxonomy. The CLI maps these onto its exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or degenerate input data (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// A numerical procedure could not produce a usable answer (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or arguments (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Family { gaussian, binomial };
enum class Estimand { ate, att };

std::string to_string(Family family);
std::string to_string(Estimand estimand);
Estimand parse_estimand(const std::string& text);

/// Covariate matrix with per-column summaries and a standardized copy.
///
/// Standard deviations use divisor N. A column whose sd is zero is kept
/// but flagged constant; its standardized column is identically zero.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  explicit DesignMatrix(Matrix values);

  const Matrix& values() const { return values_; }
  const Matrix& standardized() const { return standardized_; }
  const Vector& column_means() const { return means_; }
  const Vector& column_sds() const { return sds_; }
  bool is_constant(Index j) const { return sds_[j] <= 0.0; }

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }

  DesignMatrix select_rows(std::span<const Index> rows) const;

 private:
  Matrix values_;
  Matrix standardized_;
  Vector means_;
  Vector sds_;
};

/// Observed (outcome, treatment, covariates) triple.
struct Dataset {
  Vector y;
  Treatment w;
  DesignMatrix x;
  std::vector<std::string> covariate_names;

  Index size() const { return y.size(); }
  Index n_treated() const;
  Index n_control() const { return size() - n_treated(); }

  /// Checks lengths, binary treatment and finiteness. With
  /// `require_both_arms`, also rejects an empty arm.
  void validate(bool require_both_arms = true) const;
};

Dataset make_dataset(Vector y, Treatment w, Matrix x,
                     std::vector<std::string> covariate_names = {});

std::vector<Index> indices_where(const Treatment& w, int arm);

}  // namespace drmatch
