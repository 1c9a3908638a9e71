#include "vdkms/identity.hpp"

#include "vdkms/ledger.hpp"

namespace vdkms::identity {

namespace {
constexpr const char* kPrefix = "did:vdkms:";
constexpr const char* kPeerPrefix = "did:vdkms:peer:";
}  // namespace

std::string Did::str() const { return (peer ? kPeerPrefix : kPrefix) + id; }

Did Did::parse(const std::string& text) {
    Did d;
    std::string_view rest;
    if (text.starts_with(kPeerPrefix)) {
        d.peer = true;
        rest = std::string_view(text).substr(std::string_view(kPeerPrefix).size());
    } else if (text.starts_with(kPrefix)) {
        d.peer = false;
        rest = std::string_view(text).substr(std::string_view(kPrefix).size());
    } else {
        throw ParseError("not a vdkms DID: " + text);
    }
    if (rest.empty()) throw ParseError("empty DID identifier");
    Bytes raw = base58_decode(rest);  // validates the alphabet
    if (raw.size() != Digest::size())
        throw ParseError("DID identifier does not decode to a 32-byte digest");
    d.id = std::string(rest);
    return d;
}

void to_json(Json& j, const Did& d) { j = d.str(); }
void from_json(const Json& j, Did& d) { d = Did::parse(j.get<std::string>()); }

Did did_from_key(const crypto::PublicKey& pk, bool peer) {
    Digest h = crypto::digest(pk.view());
    Did d;
    d.peer = peer;
    d.id = base58_encode(h.view());
    return d;
}

std::optional<crypto::PublicKey> DidDocument::key_at(std::int64_t t) const {
    if (t < created_at) return std::nullopt;
    // previous_keys are in retirement order; the key active at t is the first
    // one retired after t, else the current active key.
    for (const auto& rk : previous_keys)
        if (t < rk.retired_at) return rk.public_key;
    return active_public_key;
}

Json DidDocument::to_json() const {
    Json prev = Json::array();
    for (const auto& rk : previous_keys)
        prev.push_back(Json{{"public_key", rk.public_key.hex()}, {"retired_at", rk.retired_at}});
    return Json{
        {"id", id.str()},
        {"active_public_key", active_public_key.hex()},
        {"previous_keys", prev},
        {"created_at", created_at},
        {"updated_at", updated_at},
        {"revoked", revoked},
    };
}

DidDocument DidDocument::from_json(const Json& j) {
    DidDocument d;
    d.id = Did::parse(get_field<std::string>(j, "id"));
    d.active_public_key =
        crypto::PublicKey::from_hex_str(get_field<std::string>(j, "active_public_key"));
    for (const auto& e : j.at("previous_keys")) {
        RetiredKey rk;
        rk.public_key = crypto::PublicKey::from_hex_str(get_field<std::string>(e, "public_key"));
        rk.retired_at = get_field<std::int64_t>(e, "retired_at");
        d.previous_keys.push_back(rk);
    }
    d.created_at = get_field<std::int64_t>(j, "created_at");
    d.updated_at = get_field<std::int64_t>(j, "updated_at");
    d.revoked = get_field<bool>(j, "revoked");
    return d;
}

PeerDid make_peer_did(Rng& rng, const Did& counterparty) {
    PeerDid p;
    p.pairwise_keypair = crypto::keygen(rng);
    p.did = did_from_key(p.pairwise_keypair.public_key, /*peer=*/true);
    p.counterparty = counterparty;
    return p;
}

const DidDocument& resolve(const ledger::Snapshot& view, const Did& did) {
    return view.resolve(did);
}

ledger::Transaction rotate_key(const crypto::KeyPair& current, const Did& did,
                               const crypto::PublicKey& new_public_key, Rng& rng,
                               std::int64_t now_s) {
    Json payload{{"did", did.str()}, {"new_public_key", new_public_key.hex()}};
    return ledger::make_txn(ledger::TxnKind::rotate, std::move(payload), did,
                            current.secret_key, rng, now_s);
}

ledger::Transaction revoke_did(const crypto::KeyPair& authority, const Did& authority_did,
                               const Did& target, Rng& rng, std::int64_t now_s) {
    Json payload{{"did", target.str()}};
    return ledger::make_txn(ledger::TxnKind::did_revoke, std::move(payload), authority_did,
                            authority.secret_key, rng, now_s);
}

}  // namespace vdkms::identity
