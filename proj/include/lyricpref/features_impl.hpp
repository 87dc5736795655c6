#pragma once

#include "lyricpref/errors.hpp"

namespace lyricpref {

template <typename Scalar>
Vector<Scalar> flatten_tensor(const BasicFeatureTensor<Scalar>& tensor, Eigen::Index max_len) {
    const auto t = tensor.timesteps();
    if (t > max_len)
        throw FeatureError("line '" + tensor.line_id + "' has " + std::to_string(t) +
                           " timesteps, more than the flattening length " + std::to_string(max_len));
    const auto f = tensor.width();
    Vector<Scalar> out = Vector<Scalar>::Zero((max_len + 1) * f);
    for (Eigen::Index r = 0; r < t; ++r) out.segment(r * f, f) = tensor.rows.row(r).transpose();
    out.tail(f) = tensor.aggregate().transpose();
    return out;
}

} // namespace lyricpref
