#include "vdkms/rng.hpp"

#include <sodium.h>

#include <cmath>
#include <cstring>

#include "vdkms/crypto.hpp"

namespace vdkms {

std::uint64_t Rng::next_u64() {
    std::array<std::uint8_t, 8> buf;
    fill(buf);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

std::uint64_t Rng::uniform(std::uint64_t bound) {
    if (bound == 0) return 0;
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % bound;
}

double Rng::uniform_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::exponential(double rate) {
    double u;
    do {
        u = uniform_unit();
    } while (u <= 0.0);
    return -std::log(u) / rate;
}

bool Rng::chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform_unit() < p;
}

std::array<std::uint8_t, 32> Rng::seed32() {
    std::array<std::uint8_t, 32> s;
    fill(s);
    return s;
}

void SystemRng::fill(std::span<std::uint8_t> out) {
    crypto::init();
    randombytes_buf(out.data(), out.size());
}

SeededRng::SeededRng(std::uint64_t seed) {
    crypto::init();
    std::array<std::uint8_t, 8> le{};
    for (int i = 0; i < 8; ++i) le[i] = static_cast<std::uint8_t>(seed >> (8 * i));
    crypto_generichash(state_.data(), state_.size(), le.data(), le.size(), nullptr, 0);
}

SeededRng::SeededRng(const std::array<std::uint8_t, 32>& seed) : state_(seed) {
    crypto::init();
}

void SeededRng::fill(std::span<std::uint8_t> out) {
    std::size_t done = 0;
    while (done < out.size()) {
        std::size_t chunk = std::min<std::size_t>(out.size() - done, 4096);
        randombytes_buf_deterministic(out.data() + done, chunk, state_.data());
        advance();
        done += chunk;
    }
}

void SeededRng::advance() {
    static const unsigned char step[] = "vdkms/rng-step";
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, state_.size());
    crypto_generichash_update(&st, state_.data(), state_.size());
    crypto_generichash_update(&st, step, sizeof(step) - 1);
    crypto_generichash_final(&st, state_.data(), state_.size());
}

SeededRng SeededRng::fork(std::string_view label) const {
    std::array<std::uint8_t, 32> sub{};
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, sub.size());
    crypto_generichash_update(&st, state_.data(), state_.size());
    crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(label.data()),
                              label.size());
    crypto_generichash_final(&st, sub.data(), sub.size());
    return SeededRng(sub);
}

}  // namespace vdkms
