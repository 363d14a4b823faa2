#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace puzzletune {

// xoshiro256** seeded through splitmix64. Every distribution below is
// implemented here rather than via <random> so streams are identical across
// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    // Child stream keyed by (this stream's key, label). Independent of how many
    // values have already been drawn from the parent.
    Rng fork(std::string_view label) const;
    Rng fork(std::string_view label, std::uint64_t index) const;

    std::uint64_t key() const noexcept { return key_; }

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    // Unbiased integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);
    double normal();
    // Normal(0, stddev) resampled until within two standard deviations.
    double truncated_normal(double stddev);

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

    // Uniform permutation of {0, ..., n-1}.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::uint64_t key_;
    std::array<std::uint64_t, 4> state_{};
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace puzzletune
