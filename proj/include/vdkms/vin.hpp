#pragma once

#include <string>
#include <string_view>

#include "vdkms/rng.hpp"

namespace vdkms {

/// ISO 3779 VIN checks: 17 characters, no I/O/Q, check digit at position 9.
bool vin_valid(std::string_view vin);

/// Check digit ('0'-'9' or 'X') for a 17-character candidate; the character
/// already at position 9 is ignored.
char vin_check_digit(std::string_view vin);

/// Random VIN with a correct check digit (for workloads and tests).
std::string random_vin(Rng& rng);

}  // namespace vdkms
