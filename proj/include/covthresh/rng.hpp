#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace covthresh {

/// (seed, stream) pair that fully determines a random sequence.
struct RngSeed {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    /// Deterministic sub-stream for work item `index` (replicate, sample,
    /// cell). Children of distinct indices are distinct streams under the
    /// same seed, independent of evaluation order.
    RngSeed child(std::uint64_t index) const noexcept;

    bool operator==(const RngSeed&) const = default;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

/// Counter-based generator: key = seed, counter = (block index, stream).
/// Satisfies UniformRandomBitGenerator with 64-bit output.
class StreamRng {
public:
    using result_type = std::uint64_t;

    explicit StreamRng(RngSeed s) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }
    result_type operator()() noexcept;

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() noexcept;
    /// Standard normal via Box-Muller.
    double normal() noexcept;
    void fill_normal(std::span<double> out) noexcept;
    /// Uniform integer in [0, bound), bound >= 1, unbiased.
    std::uint64_t below(std::uint64_t bound) noexcept;

private:
    void refill() noexcept;

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int used_ = 2;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace covthresh
