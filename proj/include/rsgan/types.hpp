#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace rsgan {

// ================================================================
// type aliases
// ================================================================

template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXr = RowMatrix<double>;
using VectorXr = ColVector<double>;

// Binary feedback, one row per user. Stored values are always 1.
using SparseFeedback = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int32_t>;

using UserId = std::int32_t;
using ItemId = std::int32_t;

using ItemList = std::vector<ItemId>;
using UserList = std::vector<UserId>;

/// Logit assigned to entries that must never be selected.
inline constexpr double kMaskLogit = -1e9;

// ================================================================
// errors
// ================================================================

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct EmptyDatasetError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };

/// A loss, parameter or activation became NaN/inf.
struct NumericFault : Error {
    NumericFault(const std::string& what, int epoch = -1) : Error(what), epoch(epoch) {}
    int epoch;
};

/// A distribution over a single outcome (m = 1) or with every entry masked.
struct DegenerateDistribution : Error { using Error::Error; };

}  // namespace rsgan
