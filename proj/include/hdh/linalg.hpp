#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace hdh {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Row-major so that a sample is contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Binary vectors are stored as doubles restricted to {0, 1}.
using BitVector = Eigen::VectorXd;

using Engine = std::mt19937_64;

/// Uniform draw in [0, 1) from the top 53 bits of the engine output.
/// Unlike std::uniform_real_distribution this is identical across standard libraries.
inline double unit_uniform(Engine& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

} // namespace hdh
