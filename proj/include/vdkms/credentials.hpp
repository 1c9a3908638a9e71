#pragma once

#include <map>
#include <string>
#include <vector>

#include "vdkms/identity.hpp"
#include "vdkms/json.hpp"
#include "vdkms/txn.hpp"

namespace vdkms::credentials {

using identity::Did;

/// Named, versioned attribute list signed by its issuer.
struct Schema {
    std::string name;
    std::string version;
    std::vector<std::string> attribute_names;
    Did issuer;
    crypto::Signature signature;

    Json body_json() const;  // unsigned part, canonical signing input
    Json to_json() const;
    static Schema from_json(const Json& j);
    Digest digest() const;
    bool signature_valid(const crypto::PublicKey& issuer_key) const;
};

/// Ledger record binding the issuer's key material to a schema.
struct CredentialDefinition {
    Digest schema_ref;
    Did issuer;
    crypto::PublicKey issuer_public_key;
    crypto::Signature signature;

    Json body_json() const;
    Json to_json() const;
    static CredentialDefinition from_json(const Json& j);
    Digest digest() const;
    bool signature_valid() const;
};

/// Attribute values with their commitment salts; held by the subject only.
struct ClaimSet {
    std::map<std::string, std::pair<std::string, Salt>> claims;  // name -> (value, salt)

    Json to_json() const;
    static ClaimSet from_json(const Json& j);
};

/// Salted commitment Digest(salt || name || value), length-prefixed fields.
Digest attribute_commitment(const Salt& salt, std::string_view name, std::string_view value);

/// Digest over per-attribute commitments in lexicographic attribute order.
Digest commitment_root(const std::map<std::string, Digest>& commitments);

struct VerifiableCredential {
    Digest cred_def_ref;
    Did issuer;
    Did subject;
    crypto::PublicKey subject_public_key;
    std::map<std::string, Digest> commitments;  // attribute -> commitment
    std::int64_t issued_at = 0;
    crypto::Signature issuer_signature;

    Digest root() const { return commitment_root(commitments); }
    /// Bytes covered by issuer_signature.
    Bytes signing_bytes() const;

    Json to_json() const;
    static VerifiableCredential from_json(const Json& j);
};

/// Verifier challenge: which attributes to reveal, under which nonce.
struct ProofRequest {
    std::vector<std::string> requested_attributes;
    Nonce nonce;
    Did verifier;
    std::int64_t issued_at = 0;

    Json to_json() const;
    static ProofRequest from_json(const Json& j);
};

/// Credential fields carried inside a presentation (no attribute values).
struct PresentationCore {
    Digest cred_def_ref;
    Did issuer;
    Did subject;
    crypto::PublicKey subject_public_key;
    Digest commitment_root;
    std::int64_t issued_at = 0;
    crypto::Signature issuer_signature;

    Json to_json() const;
    static PresentationCore from_json(const Json& j);
};

/// Selective disclosure proof: requested attributes opened with their salts,
/// all others left as commitments, the whole bound to the challenge nonce by
/// the holder signature.
struct Presentation {
    std::map<std::string, std::pair<std::string, Salt>> revealed;
    std::map<std::string, Digest> hidden_commitments;
    PresentationCore core;
    Nonce challenge_nonce;
    crypto::Signature holder_signature;

    Json proof_json() const;  // everything except the holder signature
    Bytes signing_bytes() const;

    Json to_json() const;
    static Presentation from_json(const Json& j);
};

enum class VerifyFail {
    none,
    subject_not_found,
    revoked_subject,
    bad_holder_signature,
    issuer_not_found,
    revoked_issuer,
    untrusted_issuer,
    unknown_cred_def,
    unknown_schema,
    attribute_coverage,
    commitment_mismatch,
    bad_issuer_signature,
    nonce_mismatch,
    stale_request,
    missing_requested_attribute,
    unknown_credential,
    revoked_credential,
    replay,
};

const char* to_string(VerifyFail f);

struct VerifyResult {
    bool ok = false;
    VerifyFail reason = VerifyFail::none;
    std::string detail;

    static VerifyResult success() { return {true, VerifyFail::none, {}}; }
    static VerifyResult fail(VerifyFail r, std::string d = {}) {
        return {false, r, std::move(d)};
    }
};

struct SchemaWithTxn {
    Schema schema;
    ledger::Transaction txn;
};

struct CredDefWithTxn {
    CredentialDefinition definition;
    ledger::Transaction txn;
};

struct IssuedCredential {
    VerifiableCredential credential;
    ClaimSet claims;  // delivered to the subject together with the credential
    ledger::Transaction txn;
};

/// Signed schema plus its SCHEMA transaction. Attribute names must be
/// nonempty and duplicate-free.
SchemaWithTxn schema_gen(const crypto::KeyPair& registrar, const Did& registrar_did,
                         const std::string& name, const std::string& version,
                         const std::vector<std::string>& attribute_names, Rng& rng,
                         std::int64_t now_s);

/// Definition over a committed schema plus its CRED_DEF transaction.
CredDefWithTxn def_gen(const crypto::KeyPair& registrar, const Did& registrar_did,
                       const Schema& schema, Rng& rng, std::int64_t now_s);

/// Issues a credential over `cred_def`'s schema. Requires a "VIN" attribute
/// with a valid ISO 3779 check digit when the schema carries one; all values
/// must be nonempty. The CRED_REG transaction records commitments only.
IssuedCredential issue_credential(const crypto::KeyPair& registrar, const Did& registrar_did,
                                  const CredentialDefinition& cred_def, const Schema& schema,
                                  const Did& subject, const crypto::PublicKey& subject_pk,
                                  const std::map<std::string, std::string>& attributes,
                                  ByteView vin_index_key, Rng& rng, std::int64_t now_s);

/// Presentation revealing exactly the requested attributes.
Presentation proof_gen(const crypto::KeyPair& holder, const VerifiableCredential& vcred,
                       const ClaimSet& claims, const ProofRequest& request);

/// The full acceptance conjunction over a committed snapshot. Stateless with
/// respect to replay; callers keep their own nonce cache.
VerifyResult verify_presentation(const ledger::Snapshot& view, const Presentation& pres,
                                 const ProofRequest& request, std::int64_t now_s);

/// CRED_REVOKE transaction for the credential with this commitment root.
ledger::Transaction revoke_credential(const crypto::KeyPair& registrar,
                                      const Did& registrar_did, const Digest& root, Rng& rng,
                                      std::int64_t now_s);

/// Deterministic privacy-preserving dedup tag for a VIN.
Digest vin_tag(ByteView vin_index_key, std::string_view vin);

}  // namespace vdkms::credentials
