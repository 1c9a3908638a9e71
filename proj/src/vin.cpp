#include "vdkms/vin.hpp"

#include <array>
#include <cctype>

namespace vdkms {

namespace {

constexpr std::size_t kVinLength = 17;

// Transliteration per ISO 3779: A=1..H=8, J=1..N=5, P=7, R=9, S=2..Z=9.
int vin_char_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    switch (c) {
        case 'A': return 1; case 'B': return 2; case 'C': return 3;
        case 'D': return 4; case 'E': return 5; case 'F': return 6;
        case 'G': return 7; case 'H': return 8;
        case 'J': return 1; case 'K': return 2; case 'L': return 3;
        case 'M': return 4; case 'N': return 5;
        case 'P': return 7; case 'R': return 9;
        case 'S': return 2; case 'T': return 3; case 'U': return 4;
        case 'V': return 5; case 'W': return 6; case 'X': return 7;
        case 'Y': return 8; case 'Z': return 9;
        default: return -1;
    }
}

constexpr std::array<int, kVinLength> kWeights = {8, 7, 6, 5, 4, 3, 2, 10, 0,
                                                  9, 8, 7, 6, 5, 4, 3, 2};

}  // namespace

char vin_check_digit(std::string_view vin) {
    int sum = 0;
    for (std::size_t i = 0; i < kVinLength; ++i) {
        if (i == 8) continue;
        int v = vin_char_value(vin[i]);
        if (v < 0) return '?';
        sum += v * kWeights[i];
    }
    int r = sum % 11;
    return r == 10 ? 'X' : static_cast<char>('0' + r);
}

bool vin_valid(std::string_view vin) {
    if (vin.size() != kVinLength) return false;
    for (char c : vin) {
        if (c == 'I' || c == 'O' || c == 'Q') return false;
        if (!(c >= '0' && c <= '9') && !(c >= 'A' && c <= 'Z')) return false;
    }
    return vin[8] == vin_check_digit(vin);
}

std::string random_vin(Rng& rng) {
    static constexpr char kAllowed[] = "0123456789ABCDEFGHJKLMNPRSTUVWXYZ";
    std::string vin(kVinLength, '0');
    for (std::size_t i = 0; i < kVinLength; ++i)
        vin[i] = kAllowed[rng.uniform(sizeof(kAllowed) - 1)];
    vin[8] = vin_check_digit(vin);
    return vin;
}

}  // namespace vdkms
