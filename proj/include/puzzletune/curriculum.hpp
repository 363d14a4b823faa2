#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace puzzletune {

enum class CurriculumVariant { base, p16_rd, p16_r25, custom };

const char* to_string(CurriculumVariant variant) noexcept;

inline const std::vector<std::size_t> kPatchLoop{16, 32, 48, 64, 96, 112};
// Multi-scale loop for 64x64 images tokenized at 8 pixels.
inline const std::vector<std::size_t> kDeskPatchLoop{8, 16, 32};
// Alternative pacing: advance the patch size every three epochs.
inline constexpr std::size_t kSlowCycleStride = 3;

struct ScheduleState {
    CurriculumVariant variant = CurriculumVariant::base;
    std::size_t total_epochs = 1;
    std::vector<std::size_t> patch_cycle = kPatchLoop;
    std::size_t cycle_stride = 1;
    double ratio_start = 0.9;
    double ratio_end = 0.2;
};

// Named variants: "base" loops the patch sizes with a 0.9 -> 0.2 ratio decay,
// "p16-rd" fixes the patch at 16 with the same decay, "p16-r25" fixes the
// patch at 16 and the ratio at 0.25.
ScheduleState describe_variant(const std::string& name, std::size_t total_epochs);

std::size_t patch_size_at(const ScheduleState& state, std::size_t epoch);
// Linear from ratio_start at epoch 0 to ratio_end at epoch E-1, endpoints exact.
double fix_ratio_at(const ScheduleState& state, std::size_t epoch);

// Structural checks plus, when image_side > 0, that every patch size tiles the
// image into at least two locations and is a multiple of the token patch.
void validate(const ScheduleState& state, std::size_t image_side = 0, std::size_t token_patch = 1);

// "epoch,patch_size,fix_ratio" with one row per epoch.
std::string schedule_csv(const ScheduleState& state);

}  // namespace puzzletune
