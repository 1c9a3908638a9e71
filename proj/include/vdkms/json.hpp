#pragma once

#include <json.hpp>

#include "vdkms/bytes.hpp"
#include "vdkms/errors.hpp"

namespace vdkms {

// nlohmann::json keeps object keys in a std::map, so dump() already yields
// the canonical form: key-sorted, whitespace-free UTF-8. All signed payloads
// and ledger hashes go through canonical_bytes().
using Json = nlohmann::json;

inline Bytes canonical_bytes(const Json& j) {
    std::string s = j.dump();
    return Bytes(s.begin(), s.end());
}

inline std::string canonical_string(const Json& j) { return j.dump(); }

template <std::size_t N, class Tag>
void to_json(Json& j, const Fixed<N, Tag>& v) {
    j = v.hex();
}

template <std::size_t N, class Tag>
void from_json(const Json& j, Fixed<N, Tag>& v) {
    v = Fixed<N, Tag>::from_hex_str(j.template get<std::string>());
}

/// Fetch a required field, raising ParseError instead of nlohmann's
/// type_error so callers see one failure domain for malformed input.
template <class T>
T get_field(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(std::string("missing field: ") + key);
    try {
        return it->template get<T>();
    } catch (const Json::exception& e) {
        throw ParseError(std::string("bad field '") + key + "': " + e.what());
    }
}

}  // namespace vdkms
