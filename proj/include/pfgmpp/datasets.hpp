#pragma once

// Toy point-cloud generators.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pfgmpp/csv.hpp"
#include "pfgmpp/field.hpp"
#include "pfgmpp/rng.hpp"

namespace pfgmpp {

struct DatasetSpec {
  std::string name = "gaussian-mixture";
  int count = 1024;
  std::uint64_t seed = 7;
  // gaussian-mixture
  int modes = 8;
  double radius = 2.0;
  double std = 0.1;
  // two-moons, spiral, checkerboard
  double noise = 0.05;
  // single-point
  std::vector<double> point;
  // csv-file
  std::string path;
};

inline const std::vector<std::string>& dataset_names() {
  static const std::vector<std::string> names{"gaussian-mixture", "two-moons", "spiral",
                                              "checkerboard",     "single-point", "csv-file"};
  return names;
}

/// Centre of mixture mode k.
inline Vector mixture_center(int k, int modes, double radius) {
  const double a = 2.0 * std::numbers::pi * k / modes;
  Vector c(2);
  c << radius * std::cos(a), radius * std::sin(a);
  return c;
}

inline DataCloud make_dataset(const DatasetSpec& spec) {
  if (spec.name == "single-point") {
    require(!spec.point.empty(), "dataset single-point: 'point' must be nonempty");
    Vector p = Eigen::Map<const Vector>(spec.point.data(), static_cast<Eigen::Index>(spec.point.size()));
    return DataCloud::from_points({p});
  }
  if (spec.name == "csv-file") {
    require(!spec.path.empty(), "dataset csv-file: 'path' is required");
    const auto rows = csv::read_numeric(spec.path);
    Matrix m(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < rows[i].size(); ++k)
        m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = rows[i][k];
    return DataCloud(std::move(m));
  }
  require(spec.count >= 1, "dataset: count must be >= 1");
  Engine rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix m(2, spec.count);
  if (spec.name == "gaussian-mixture") {
    require(spec.modes >= 1, "dataset gaussian-mixture: modes must be >= 1");
    require(spec.std >= 0.0, "dataset gaussian-mixture: std must be >= 0");
    std::uniform_int_distribution<int> mode(0, spec.modes - 1);
    for (int i = 0; i < spec.count; ++i) {
      const Vector c = mixture_center(mode(rng), spec.modes, spec.radius);
      const double ex = normal(rng);
      const double ey = normal(rng);
      m(0, i) = c[0] + spec.std * ex;
      m(1, i) = c[1] + spec.std * ey;
    }
  } else if (spec.name == "two-moons") {
    for (int i = 0; i < spec.count; ++i) {
      const double a = std::numbers::pi * unif(rng);
      const bool upper = i % 2 == 0;
      const double x = upper ? std::cos(a) : 1.0 - std::cos(a);
      const double y = upper ? std::sin(a) : 0.5 - std::sin(a);
      const double ex = normal(rng);
      const double ey = normal(rng);
      m(0, i) = x - 0.5 + spec.noise * ex;
      m(1, i) = y - 0.25 + spec.noise * ey;
    }
  } else if (spec.name == "spiral") {
    for (int i = 0; i < spec.count; ++i) {
      const double t = 3.0 * std::numbers::pi * std::sqrt(unif(rng));
      const double ex = normal(rng);
      const double ey = normal(rng);
      m(0, i) = t * std::cos(t) / 5.0 + spec.noise * ex;
      m(1, i) = t * std::sin(t) / 5.0 + spec.noise * ey;
    }
  } else if (spec.name == "checkerboard") {
    // 4x4 board on [-2, 2]^2, filled cells where floor(x) + floor(y) is even.
    for (int i = 0; i < spec.count; ++i) {
      double x = 0.0;
      double y = 0.0;
      do {
        x = 4.0 * unif(rng) - 2.0;
        y = 4.0 * unif(rng) - 2.0;
      } while ((static_cast<int>(std::floor(x)) + static_cast<int>(std::floor(y))) % 2 != 0);
      m(0, i) = x;
      m(1, i) = y;
    }
  } else {
    throw ValidationError("dataset: unknown generator '" + spec.name + "'");
  }
  return DataCloud(std::move(m));
}

/// 8 Gaussians of std 0.1 on a radius-2 circle, 1024 points, seed 7.
inline DatasetSpec standard_mixture_spec(int count = 1024, std::uint64_t seed = 7) {
  DatasetSpec s;
  s.count = count;
  s.seed = seed;
  return s;
}

inline DataCloud standard_cloud() { return make_dataset(standard_mixture_spec()); }

/// The first ten points of the standard mixture construction (seed 7).
inline DataCloud standard_ten_point_cloud() { return make_dataset(standard_mixture_spec(10)); }

}  // namespace pfgmpp
