#include "puzzletune/gradcheck.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "puzzletune/error.hpp"

namespace puzzletune {
namespace {

double evaluate(const std::function<Tensor()>& loss) {
    NoGradGuard guard;
    return loss().item();
}

void require_deterministic(const std::function<Tensor()>& loss) {
    const double first = evaluate(loss);
    const double second = evaluate(loss);
    if (std::bit_cast<std::uint64_t>(first) != std::bit_cast<std::uint64_t>(second)) {
        fail(ErrorCode::NonDeterministicFunction, "two evaluations at the same point differ");
    }
}

void score(GradCheckReport& report, double tol) {
    report.checked = report.analytic.size();
    report.max_relative_error = 0.0;
    for (std::size_t i = 0; i < report.checked; ++i) {
        const double err = relative_error(report.analytic[i], report.numeric[i]);
        if (err > report.max_relative_error) {
            report.max_relative_error = err;
            report.worst_coordinate = i;
        }
    }
    report.passed = report.max_relative_error <= tol;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

GradCheckReport finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                                  double eps, double tol) {
    Tensor x = point.clone();
    x.set_requires_grad(true);
    std::vector<Tensor> params{x};
    std::vector<ParamCoordinate> coords(x.numel());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        coords[i] = {0, i};
    }
    return finite_diff_check([&] { return f(x); }, params, coords, eps, tol);
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& loss, std::span<Tensor> params,
                                  std::span<const ParamCoordinate> coordinates, double eps, double tol) {
    if (!(eps > 0.0)) {
        fail(ErrorCode::ConfigError, "finite-difference step must be positive");
    }
    require_deterministic(loss);

    for (auto& p : params) {
        p.zero_grad();
    }
    Tape::current().clear();
    Tensor value = loss();
    if (value.requires_grad()) {
        backward(value);
    } else if (value.numel() != 1) {
        fail(ErrorCode::NotScalar, "gradient check needs a scalar function");
    }

    GradCheckReport report;
    for (const auto& c : coordinates) {
        auto& p = params[c.param];
        const auto grad = p.grad();
        report.analytic.push_back(grad.at(c.index));

        auto data = p.mutable_data();
        const double saved = data[c.index];
        data[c.index] = saved + eps;
        const double plus = evaluate(loss);
        data[c.index] = saved - eps;
        const double minus = evaluate(loss);
        data[c.index] = saved;
        report.numeric.push_back((plus - minus) / (2.0 * eps));
    }
    score(report, tol);
    return report;
}

}  // namespace puzzletune
