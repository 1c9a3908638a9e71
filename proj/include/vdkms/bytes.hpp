#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vdkms {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);

/// Base58 (bitcoin alphabet), used for DID identifiers.
std::string base58_encode(ByteView data);
Bytes base58_decode(std::string_view text);

Bytes concat(std::initializer_list<ByteView> parts);

[[noreturn]] void throw_size_mismatch(std::size_t want, std::size_t got);

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline std::string as_string(ByteView b) {
    return {reinterpret_cast<const char*>(b.data()), b.size()};
}

/// Fixed-size byte value with a tag type so that keys, digests and nonces
/// do not convert into each other.
template <std::size_t N, class Tag>
struct Fixed {
    std::array<std::uint8_t, N> bytes{};

    static constexpr std::size_t size() { return N; }
    const std::uint8_t* data() const { return bytes.data(); }
    std::uint8_t* data() { return bytes.data(); }
    ByteView view() const { return {bytes.data(), bytes.size()}; }

    std::string hex() const { return to_hex(view()); }

    static Fixed from_hex_str(std::string_view hex_text) {
        Bytes raw = from_hex(hex_text);
        return from_bytes(raw);
    }

    static Fixed from_bytes(ByteView raw) {
        if (raw.size() != N) throw_size_mismatch(N, raw.size());
        Fixed out;
        for (std::size_t i = 0; i < N; ++i) out.bytes[i] = raw[i];
        return out;
    }

    bool is_zero() const {
        for (auto b : bytes)
            if (b != 0) return false;
        return true;
    }

    auto operator<=>(const Fixed&) const = default;
};

using Digest = Fixed<32, struct DigestTag>;
using Nonce = Fixed<16, struct NonceTag>;
using Salt = Fixed<16, struct SaltTag>;

}  // namespace vdkms
