#pragma once

#include <algorithm>
#include <functional>

#include "semxc/linalg.hpp"

namespace semxc {

/// Central finite differences of a scalar objective with respect to every
/// entry of `param`, which is perturbed in place and restored.
inline Matrix numeric_gradient(const std::function<double()>& objective, Matrix& param, double step = 1e-5) {
    Matrix g(param.rows(), param.cols());
    for (Eigen::Index i = 0; i < param.size(); ++i) {
        const double saved = param.data()[i];
        param.data()[i] = saved + step;
        const double up = objective();
        param.data()[i] = saved - step;
        const double down = objective();
        param.data()[i] = saved;
        g.data()[i] = (up - down) / (2.0 * step);
    }
    return g;
}

/// ||a - n|| / max(||a||, ||n||, floor); zero when both are (near) zero.
inline double relative_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-8) {
    const double scale = std::max({analytic.norm(), numeric.norm(), floor});
    return (analytic - numeric).norm() / scale;
}

}  // namespace semxc
