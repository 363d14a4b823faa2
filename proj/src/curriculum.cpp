#include "puzzletune/curriculum.hpp"

#include <cmath>

#include <fmt/format.h>

#include "puzzletune/error.hpp"

namespace puzzletune {

const char* to_string(CurriculumVariant variant) noexcept {
    switch (variant) {
        case CurriculumVariant::base: return "base";
        case CurriculumVariant::p16_rd: return "p16-rd";
        case CurriculumVariant::p16_r25: return "p16-r25";
        case CurriculumVariant::custom: return "custom";
    }
    return "custom";
}

ScheduleState describe_variant(const std::string& name, std::size_t total_epochs) {
    ScheduleState state;
    state.total_epochs = total_epochs;
    if (name == "base") {
        state.variant = CurriculumVariant::base;
    } else if (name == "p16-rd") {
        state.variant = CurriculumVariant::p16_rd;
        state.patch_cycle = {16};
    } else if (name == "p16-r25") {
        state.variant = CurriculumVariant::p16_r25;
        state.patch_cycle = {16};
        state.ratio_start = 0.25;
        state.ratio_end = 0.25;
    } else if (name == "custom") {
        state.variant = CurriculumVariant::custom;
    } else {
        fail(ErrorCode::UnknownVariant, "unknown curriculum variant '" + name + "'");
    }
    return state;
}

std::size_t patch_size_at(const ScheduleState& state, std::size_t epoch) {
    const std::size_t stride = state.cycle_stride == 0 ? 1 : state.cycle_stride;
    return state.patch_cycle.at((epoch / stride) % state.patch_cycle.size());
}

double fix_ratio_at(const ScheduleState& state, std::size_t epoch) {
    if (state.total_epochs <= 1) {
        return state.ratio_start;
    }
    if (epoch >= state.total_epochs) {
        fail(ErrorCode::ConfigError, "epoch " + std::to_string(epoch) + " beyond a " +
                                         std::to_string(state.total_epochs) + "-epoch schedule");
    }
    const double t = static_cast<double>(epoch) / static_cast<double>(state.total_epochs - 1);
    // std::lerp is exact at both endpoints and monotone in t.
    return std::lerp(state.ratio_start, state.ratio_end, t);
}

void validate(const ScheduleState& state, std::size_t image_side, std::size_t token_patch) {
    if (state.patch_cycle.empty()) {
        fail(ErrorCode::ConfigError, "curriculum.patch_cycle must not be empty");
    }
    if (state.cycle_stride == 0 || state.total_epochs == 0) {
        fail(ErrorCode::ConfigError, "curriculum stride and epoch count must be positive");
    }
    if (!(state.ratio_start >= state.ratio_end && state.ratio_end >= 0.0 && state.ratio_start <= 1.0)) {
        fail(ErrorCode::ConfigError, "fix ratios must satisfy 1 >= ratio_start >= ratio_end >= 0");
    }
    if (image_side == 0) {
        return;
    }
    for (auto p : state.patch_cycle) {
        if (p == 0 || image_side % p != 0) {
            fail(ErrorCode::IndivisiblePatchSize, fmt::format("puzzle patch {} does not divide image side {}", p, image_side));
        }
        if (p >= image_side) {
            fail(ErrorCode::ConfigError, fmt::format("puzzle patch {} leaves fewer than two locations", p));
        }
        if (token_patch == 0 || p % token_patch != 0) {
            fail(ErrorCode::IndivisibleTokenPatch,
                 fmt::format("puzzle patch {} is not a multiple of the token patch {}", p, token_patch));
        }
    }
}

std::string schedule_csv(const ScheduleState& state) {
    std::string out = "epoch,patch_size,fix_ratio\n";
    for (std::size_t e = 0; e < state.total_epochs; ++e) {
        out += fmt::format("{},{},{:.6f}\n", e, patch_size_at(state, e), fix_ratio_at(state, e));
    }
    return out;
}

}  // namespace puzzletune
