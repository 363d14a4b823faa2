#pragma once

#include <gtest/gtest.h>

#include "puzzletune/error.hpp"
#include "puzzletune/rng.hpp"
#include "puzzletune/tensor.hpp"

namespace puzzletune::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::vector<double> data(element_count(shape));
    for (auto& v : data) {
        v = rng.uniform(lo, hi);
    }
    return Tensor(std::move(shape), std::move(data));
}

template <typename F>
ErrorCode error_code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected a puzzletune::Error";
    return ErrorCode::IoError;
}

}  // namespace puzzletune::testing
