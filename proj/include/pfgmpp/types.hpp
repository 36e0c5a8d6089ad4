#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pfgmpp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Bad input or configuration. Maps to exit code 1 at the CLI.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure while doing work (divergence, IO, missing files). Exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

/// Data dimension N and augmentation dimension D.
///
/// The augmentation dimension is either a finite positive real or the
/// Gaussian-limit mode (D -> infinity). In Gaussian mode every "anchor"
/// argument is interpreted directly as the noise level sigma, so that
/// anchor_for_sigma / sigma_for_anchor are the only places where the
/// alignment rule r = sigma * sqrt(D) is applied.
class SpaceConfig {
 public:
  static SpaceConfig finite(int n_data, double d_aug) {
    require(n_data >= 1, "n_data must be >= 1");
    require(std::isfinite(d_aug) && d_aug > 0.0, "d_aug must be a finite positive real");
    return SpaceConfig(n_data, d_aug);
  }
  static SpaceConfig gaussian(int n_data) {
    require(n_data >= 1, "n_data must be >= 1");
    return SpaceConfig(n_data, std::nullopt);
  }

  int n() const { return n_data_; }
  bool is_gaussian() const { return !d_aug_.has_value(); }
  /// Finite D. Throws in Gaussian mode.
  double d() const {
    if (!d_aug_) throw ValidationError("Gaussian-limit mode has no finite D");
    return *d_aug_;
  }
  /// Half the total exponent, (N + D) / 2.
  double half_total() const { return 0.5 * (n_data_ + d()); }

  /// r = sigma * sqrt(D); identity in Gaussian mode.
  double anchor_for_sigma(double sigma) const {
    return is_gaussian() ? sigma : sigma * std::sqrt(*d_aug_);
  }
  /// sigma = r / sqrt(D); identity in Gaussian mode.
  double sigma_for_anchor(double r) const {
    return is_gaussian() ? r : r / std::sqrt(*d_aug_);
  }
  /// sqrt(D) / r, the factor that turns x - y into the normalized target.
  double target_scale(double r) const { return 1.0 / sigma_for_anchor(r); }

  std::string label() const {
    if (is_gaussian()) return "gaussian";
    std::string s = std::to_string(*d_aug_);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }

  bool operator==(const SpaceConfig&) const = default;

 private:
  SpaceConfig(int n, std::optional<double> d) : n_data_(n), d_aug_(d) {}
  int n_data_;
  std::optional<double> d_aug_;
};

/// Data vector x with its anchor r >= 0 (norm of the augmentation).
struct AugmentedPoint {
  Vector x;
  double r = 0.0;
};

inline void check_dim(const Vector& v, int n, const char* what) {
  if (v.size() != n) {
    throw ValidationError(std::string(what) + ": dimension mismatch (got " +
                          std::to_string(v.size()) + ", expected " + std::to_string(n) + ")");
  }
}

}  // namespace pfgmpp
