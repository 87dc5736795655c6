#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace lyricpref {

using Eigen::MatrixXd;
using Eigen::VectorXd;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Binary preference label. Stored as 0/1 in numeric contexts.
enum class Label : std::uint8_t { NotInspiring = 0, Inspiring = 1 };

inline const char* to_string(Label l) {
    return l == Label::Inspiring ? "inspiring" : "not_inspiring";
}

inline int to_int(Label l) { return static_cast<int>(l); }

using Labels = std::vector<int>; // 0/1 per sample

} // namespace lyricpref
