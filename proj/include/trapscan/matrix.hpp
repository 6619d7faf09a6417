#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "trapscan/errors.hpp"

namespace trapscan {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<const RowMajorMatrix>;

// Dense layer weight matrix: rows x cols doubles in row-major order.
struct WeightMatrix {
    std::string layer_id;
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<double> data;  // length rows * cols
    std::string source;        // file path or synthetic tag

    WeightMatrix() = default;
    WeightMatrix(std::string id, std::int64_t n, std::int64_t m,
                 std::vector<double> values, std::string src = "synthetic")
        : layer_id(std::move(id)), rows(n), cols(m), data(std::move(values)),
          source(std::move(src)) {
        validate_shape();
    }

    std::int64_t size() const { return rows * cols; }

    double& at(std::int64_t i, std::int64_t j) { return data[i * cols + j]; }
    double at(std::int64_t i, std::int64_t j) const { return data[i * cols + j]; }

    MatrixMap map() const { return MatrixMap(data.data(), rows, cols); }

    void validate_shape() const {
        if (rows < 1 || cols < 1)
            raise(ErrorCode::Dimension,
                  "layer '" + layer_id + "' has non-positive shape");
        if (static_cast<std::int64_t>(data.size()) != rows * cols)
            raise(ErrorCode::Dimension,
                  "layer '" + layer_id + "' data length does not match shape");
    }

    // Reports the flat index of the first non-finite entry, if any.
    void validate_finite() const {
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (!std::isfinite(data[i]))
                raise(ErrorCode::NonFiniteEntry,
                      "layer '" + layer_id + "' has non-finite entry at flat index " +
                          std::to_string(i));
        }
    }
};

inline WeightMatrix from_eigen(const std::string& id, const Eigen::MatrixXd& m,
                               const std::string& source = "synthetic") {
    std::vector<double> data(static_cast<std::size_t>(m.rows() * m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            data[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    return WeightMatrix(id, m.rows(), m.cols(), std::move(data), source);
}

}  // namespace trapscan
