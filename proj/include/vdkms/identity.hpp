#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vdkms/crypto.hpp"
#include "vdkms/json.hpp"

namespace vdkms::ledger {
class Snapshot;
struct Transaction;
}  // namespace vdkms::ledger

namespace vdkms::identity {

/// Self-certifying identifier: base58 of the public key digest under the
/// "vdkms" method, or "vdkms:peer" for pairwise DIDs that never touch the
/// public ledger.
struct Did {
    bool peer = false;
    std::string id;  // base58 of the 32-byte key digest

    std::string str() const;
    static Did parse(const std::string& text);

    bool empty() const { return id.empty(); }
    auto operator<=>(const Did&) const = default;
};

void to_json(Json& j, const Did& d);
void from_json(const Json& j, Did& d);

Did did_from_key(const crypto::PublicKey& pk, bool peer = false);

struct RetiredKey {
    crypto::PublicKey public_key;
    std::int64_t retired_at = 0;
};

struct DidDocument {
    Did id;
    crypto::PublicKey active_public_key;
    std::vector<RetiredKey> previous_keys;  // in retirement order
    std::int64_t created_at = 0;
    std::int64_t updated_at = 0;
    bool revoked = false;

    /// Verification key that was active at time t (rotation-aware), or
    /// nullopt if the document did not exist yet.
    std::optional<crypto::PublicKey> key_at(std::int64_t t) const;

    Json to_json() const;
    static DidDocument from_json(const Json& j);
};

/// Pairwise identity used for one counterparty only.
struct PeerDid {
    Did did;
    crypto::KeyPair pairwise_keypair;
    Did counterparty;
};

PeerDid make_peer_did(Rng& rng, const Did& counterparty);

/// Document for `did` as of the snapshot. Throws NotFoundError for unknown
/// DIDs and LedgerError for peer DIDs, which are never resolvable.
const DidDocument& resolve(const ledger::Snapshot& view, const Did& did);

/// ROTATE transaction binding `new_pair`'s public key, signed by the current
/// active key (which must be `current`).
ledger::Transaction rotate_key(const crypto::KeyPair& current, const Did& did,
                               const crypto::PublicKey& new_public_key, Rng& rng,
                               std::int64_t now_s);

/// DID_REVOKE transaction; only registrars pass ledger validation.
ledger::Transaction revoke_did(const crypto::KeyPair& authority, const Did& authority_did,
                               const Did& target, Rng& rng, std::int64_t now_s);

}  // namespace vdkms::identity
