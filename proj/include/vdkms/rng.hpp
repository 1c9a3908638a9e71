#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>

#include "vdkms/bytes.hpp"

namespace vdkms {

/// Injectable randomness source. Every operation that needs entropy takes an
/// Rng so that simulations and tests replay bit-identically from a seed.
class Rng {
public:
    virtual ~Rng() = default;
    virtual void fill(std::span<std::uint8_t> out) = 0;

    std::uint64_t next_u64();
    /// Uniform in [0, bound), rejection-sampled.
    std::uint64_t uniform(std::uint64_t bound);
    /// Uniform double in [0, 1) with 53 bits.
    double uniform_unit();
    /// Exponential inter-arrival with the given rate (events per unit).
    double exponential(double rate);
    bool chance(double p);

    std::array<std::uint8_t, 32> seed32();
};

/// OS randomness (libsodium randombytes).
class SystemRng final : public Rng {
public:
    void fill(std::span<std::uint8_t> out) override;
};

/// Deterministic ChaCha20-based stream seeded from a 64-bit or 256-bit seed.
class SeededRng final : public Rng {
public:
    explicit SeededRng(std::uint64_t seed);
    explicit SeededRng(const std::array<std::uint8_t, 32>& seed);

    void fill(std::span<std::uint8_t> out) override;

    /// Independent substream; distinct labels give uncorrelated streams.
    SeededRng fork(std::string_view label) const;

private:
    std::array<std::uint8_t, 32> state_{};
    void advance();
};

}  // namespace vdkms
