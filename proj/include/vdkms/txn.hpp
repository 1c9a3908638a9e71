#pragma once

#include <cstdint>
#include <string>

#include "vdkms/identity.hpp"
#include "vdkms/json.hpp"

namespace vdkms::ledger {

using identity::Did;

/// Accepted timestamp skew for transactions and envelopes.
inline constexpr std::int64_t kTimestampWindowS = 300;

enum class TxnKind {
    did_reg,
    schema,
    cred_def,
    cred_reg,
    cred_revoke,
    did_revoke,
    rotate,
};

const char* to_string(TxnKind k);
TxnKind txn_kind_from_string(const std::string& s);

struct Transaction {
    TxnKind kind = TxnKind::did_reg;
    Json payload;
    Did author;
    crypto::Signature author_signature;
    Nonce nonce;
    std::int64_t timestamp = 0;

    /// Bytes covered by author_signature: canonical {kind, nonce, payload,
    /// timestamp}.
    Bytes signing_bytes() const;
    /// Transaction id: digest of the full canonical form.
    Digest digest() const;

    Json to_json() const;
    static Transaction from_json(const Json& j);
};

/// Signs and assembles a transaction for the given author key.
Transaction make_txn(TxnKind kind, Json payload, const Did& author,
                     const crypto::SecretKey& sk, Rng& rng, std::int64_t now_s);

Transaction make_did_reg(const crypto::KeyPair& kp, bool peer, Rng& rng, std::int64_t now_s);

}  // namespace vdkms::ledger
