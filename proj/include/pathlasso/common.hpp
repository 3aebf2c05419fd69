#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pathlasso {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Matrix or vector dimensions do not line up.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A computation produced or received non-finite values.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Inconsistent configuration (bad split sizes, empty grids, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A brute-force computation would exceed its hard cap.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A metric is undefined for the given inputs (e.g. zero total variance).
struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file; the message carries the row/column location.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training failure; the message carries the stage tag.
struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check_shape(bool ok, const std::string& what)
{
    if (!ok)
        throw ShapeError(what);
}

}  // namespace pathlasso
