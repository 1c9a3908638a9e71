#pragma once

// Independent ISO 3779 check-digit oracle for tests. Written against the
// published transliteration table, deliberately not sharing code with the
// library implementation.

#include <map>
#include <numeric>
#include <string>

namespace vdkms_test {

inline char vin_oracle_check_digit(const std::string& vin) {
    static const std::map<char, int> translit = {
        {'0', 0}, {'1', 1}, {'2', 2}, {'3', 3}, {'4', 4}, {'5', 5}, {'6', 6}, {'7', 7},
        {'8', 8}, {'9', 9}, {'A', 1}, {'B', 2}, {'C', 3}, {'D', 4}, {'E', 5}, {'F', 6},
        {'G', 7}, {'H', 8}, {'J', 1}, {'K', 2}, {'L', 3}, {'M', 4}, {'N', 5}, {'P', 7},
        {'R', 9}, {'S', 2}, {'T', 3}, {'U', 4}, {'V', 5}, {'W', 6}, {'X', 7}, {'Y', 8},
        {'Z', 9}};
    static const int weights[17] = {8, 7, 6, 5, 4, 3, 2, 10, 0, 9, 8, 7, 6, 5, 4, 3, 2};
    long sum = 0;
    for (int i = 0; i < 17; ++i) {
        if (i == 8) continue;
        auto it = translit.find(vin[static_cast<std::size_t>(i)]);
        if (it == translit.end()) return '?';
        sum += static_cast<long>(it->second) * weights[i];
    }
    long rem = sum % 11;
    return rem == 10 ? 'X' : static_cast<char>('0' + rem);
}

inline bool vin_oracle_valid(const std::string& vin) {
    if (vin.size() != 17) return false;
    for (char c : vin) {
        bool digit = c >= '0' && c <= '9';
        bool alpha = c >= 'A' && c <= 'Z' && c != 'I' && c != 'O' && c != 'Q';
        if (!digit && !alpha) return false;
    }
    return vin[8] == vin_oracle_check_digit(vin);
}

}  // namespace vdkms_test
