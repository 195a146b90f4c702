#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace geomap {

/// Row-major point array, one point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IndexArray = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Rejected input or configuration. The CLI maps this to exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced an unusable result (non-finite values, singular
/// systems, folded elements where they are not allowed). CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense channel-first array on a structured grid: shape = [channels, n_0, ..., n_{d-1}].
struct GridTensor {
  std::vector<std::int64_t> shape;
  std::vector<double> data;

  std::int64_t channels() const { return shape.empty() ? 0 : shape.front(); }
  std::int64_t spatial_size() const {
    std::int64_t n = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) n *= shape[i];
    return n;
  }
};

enum class BoundaryKind { Square, Free };
enum class Provenance { Analytic, Surrogate, Lbs, DemOracle };

std::string to_string(BoundaryKind kind);
std::string to_string(Provenance provenance);
BoundaryKind boundary_kind_from_string(const std::string& s);
Provenance provenance_from_string(const std::string& s);

}  // namespace geomap
