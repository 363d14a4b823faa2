#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "puzzletune/tensor.hpp"

namespace puzzletune {

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_coordinate = 0;
    std::size_t checked = 0;
    bool passed = true;
    std::vector<double> analytic;
    std::vector<double> numeric;
};

// Coordinates whose gradients are both below this magnitude compare by
// absolute difference instead of relative error.
inline constexpr double kGradCheckFloor = 1e-7;

double relative_error(double analytic, double numeric, double floor = kGradCheckFloor);

// Compares backward() against central differences (f(x+eps) - f(x-eps)) / 2eps
// for every element of `point`. `f` must return a scalar.
GradCheckReport finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                                  double eps, double tol);

struct ParamCoordinate {
    std::size_t param = 0;
    std::size_t index = 0;
};

// Same check for a loss over several leaf parameters, restricted to the given
// coordinates. Parameters are perturbed in place and restored afterwards.
GradCheckReport finite_diff_check(const std::function<Tensor()>& loss, std::span<Tensor> params,
                                  std::span<const ParamCoordinate> coordinates, double eps, double tol);

}  // namespace puzzletune
