#include "vdkms/credentials.hpp"

#include <algorithm>
#include <set>

#include "vdkms/ledger.hpp"
#include "vdkms/vin.hpp"

namespace vdkms::credentials {

// ---------------------------------------------------------------------------
// Schema

Json Schema::body_json() const {
    return Json{
        {"attribute_names", attribute_names},
        {"issuer", issuer.str()},
        {"name", name},
        {"version", version},
    };
}

Json Schema::to_json() const {
    Json j = body_json();
    j["signature"] = signature.hex();
    return j;
}

Schema Schema::from_json(const Json& j) {
    Schema s;
    s.name = get_field<std::string>(j, "name");
    s.version = get_field<std::string>(j, "version");
    s.attribute_names = get_field<std::vector<std::string>>(j, "attribute_names");
    s.issuer = Did::parse(get_field<std::string>(j, "issuer"));
    s.signature = crypto::Signature::from_hex_str(get_field<std::string>(j, "signature"));
    return s;
}

Digest Schema::digest() const { return crypto::digest(canonical_bytes(to_json())); }

bool Schema::signature_valid(const crypto::PublicKey& issuer_key) const {
    return crypto::verify(issuer_key, canonical_bytes(body_json()), signature);
}

// ---------------------------------------------------------------------------
// CredentialDefinition

Json CredentialDefinition::body_json() const {
    return Json{
        {"issuer", issuer.str()},
        {"issuer_public_key", issuer_public_key.hex()},
        {"schema_ref", schema_ref.hex()},
    };
}

Json CredentialDefinition::to_json() const {
    Json j = body_json();
    j["signature"] = signature.hex();
    return j;
}

CredentialDefinition CredentialDefinition::from_json(const Json& j) {
    CredentialDefinition d;
    d.schema_ref = Digest::from_hex_str(get_field<std::string>(j, "schema_ref"));
    d.issuer = Did::parse(get_field<std::string>(j, "issuer"));
    d.issuer_public_key =
        crypto::PublicKey::from_hex_str(get_field<std::string>(j, "issuer_public_key"));
    d.signature = crypto::Signature::from_hex_str(get_field<std::string>(j, "signature"));
    return d;
}

Digest CredentialDefinition::digest() const {
    return crypto::digest(canonical_bytes(to_json()));
}

bool CredentialDefinition::signature_valid() const {
    return crypto::verify(issuer_public_key, canonical_bytes(body_json()), signature);
}

// ---------------------------------------------------------------------------
// Claims and commitments

Json ClaimSet::to_json() const {
    Json j = Json::object();
    for (const auto& [name, vs] : claims)
        j[name] = Json{{"value", vs.first}, {"salt", vs.second.hex()}};
    return j;
}

ClaimSet ClaimSet::from_json(const Json& j) {
    ClaimSet c;
    for (auto it = j.begin(); it != j.end(); ++it) {
        c.claims[it.key()] = {get_field<std::string>(it.value(), "value"),
                              Salt::from_hex_str(get_field<std::string>(it.value(), "salt"))};
    }
    return c;
}

Digest attribute_commitment(const Salt& salt, std::string_view name, std::string_view value) {
    Bytes input;
    input.insert(input.end(), salt.bytes.begin(), salt.bytes.end());
    auto put_lp = [&input](std::string_view s) {
        std::uint32_t n = static_cast<std::uint32_t>(s.size());
        for (int i = 0; i < 4; ++i) input.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
        input.insert(input.end(), s.begin(), s.end());
    };
    put_lp(name);
    put_lp(value);
    return crypto::digest(input);
}

Digest commitment_root(const std::map<std::string, Digest>& commitments) {
    Bytes input;  // std::map iterates in lexicographic name order
    for (const auto& [name, c] : commitments)
        input.insert(input.end(), c.bytes.begin(), c.bytes.end());
    return crypto::digest(input);
}

// ---------------------------------------------------------------------------
// VerifiableCredential

Bytes VerifiableCredential::signing_bytes() const {
    return canonical_bytes(Json{
        {"commitment_root", root().hex()},
        {"cred_def_ref", cred_def_ref.hex()},
        {"issued_at", issued_at},
        {"subject", subject.str()},
        {"subject_public_key", subject_public_key.hex()},
    });
}

Json VerifiableCredential::to_json() const {
    Json commits = Json::object();
    for (const auto& [name, c] : commitments) commits[name] = c.hex();
    return Json{
        {"commitments", commits},
        {"cred_def_ref", cred_def_ref.hex()},
        {"issued_at", issued_at},
        {"issuer", issuer.str()},
        {"issuer_signature", issuer_signature.hex()},
        {"subject", subject.str()},
        {"subject_public_key", subject_public_key.hex()},
    };
}

VerifiableCredential VerifiableCredential::from_json(const Json& j) {
    VerifiableCredential v;
    v.cred_def_ref = Digest::from_hex_str(get_field<std::string>(j, "cred_def_ref"));
    v.issuer = Did::parse(get_field<std::string>(j, "issuer"));
    v.subject = Did::parse(get_field<std::string>(j, "subject"));
    v.subject_public_key =
        crypto::PublicKey::from_hex_str(get_field<std::string>(j, "subject_public_key"));
    const Json& commits = j.at("commitments");
    for (auto it = commits.begin(); it != commits.end(); ++it)
        v.commitments[it.key()] = Digest::from_hex_str(it.value().get<std::string>());
    v.issued_at = get_field<std::int64_t>(j, "issued_at");
    v.issuer_signature =
        crypto::Signature::from_hex_str(get_field<std::string>(j, "issuer_signature"));
    return v;
}

// ---------------------------------------------------------------------------
// ProofRequest / Presentation

Json ProofRequest::to_json() const {
    return Json{
        {"issued_at", issued_at},
        {"nonce", nonce.hex()},
        {"requested_attributes", requested_attributes},
        {"verifier", verifier.str()},
    };
}

ProofRequest ProofRequest::from_json(const Json& j) {
    ProofRequest r;
    r.requested_attributes = get_field<std::vector<std::string>>(j, "requested_attributes");
    r.nonce = Nonce::from_hex_str(get_field<std::string>(j, "nonce"));
    r.verifier = Did::parse(get_field<std::string>(j, "verifier"));
    r.issued_at = get_field<std::int64_t>(j, "issued_at");
    return r;
}

Json PresentationCore::to_json() const {
    return Json{
        {"commitment_root", commitment_root.hex()},
        {"cred_def_ref", cred_def_ref.hex()},
        {"issued_at", issued_at},
        {"issuer", issuer.str()},
        {"issuer_signature", issuer_signature.hex()},
        {"subject", subject.str()},
        {"subject_public_key", subject_public_key.hex()},
    };
}

PresentationCore PresentationCore::from_json(const Json& j) {
    PresentationCore c;
    c.cred_def_ref = Digest::from_hex_str(get_field<std::string>(j, "cred_def_ref"));
    c.issuer = Did::parse(get_field<std::string>(j, "issuer"));
    c.subject = Did::parse(get_field<std::string>(j, "subject"));
    c.subject_public_key =
        crypto::PublicKey::from_hex_str(get_field<std::string>(j, "subject_public_key"));
    c.commitment_root = Digest::from_hex_str(get_field<std::string>(j, "commitment_root"));
    c.issued_at = get_field<std::int64_t>(j, "issued_at");
    c.issuer_signature =
        crypto::Signature::from_hex_str(get_field<std::string>(j, "issuer_signature"));
    return c;
}

Json Presentation::proof_json() const {
    Json revealed_j = Json::object();
    for (const auto& [name, vs] : revealed)
        revealed_j[name] = Json{{"value", vs.first}, {"salt", vs.second.hex()}};
    Json hidden_j = Json::object();
    for (const auto& [name, c] : hidden_commitments) hidden_j[name] = c.hex();
    return Json{
        {"core", core.to_json()},
        {"hidden_commitments", hidden_j},
        {"revealed", revealed_j},
    };
}

Bytes Presentation::signing_bytes() const {
    return canonical_bytes(Json{
        {"challenge_nonce", challenge_nonce.hex()},
        {"proof", proof_json()},
    });
}

Json Presentation::to_json() const {
    Json j = proof_json();
    j["challenge_nonce"] = challenge_nonce.hex();
    j["holder_signature"] = holder_signature.hex();
    return j;
}

Presentation Presentation::from_json(const Json& j) {
    Presentation p;
    const Json& revealed_j = j.at("revealed");
    for (auto it = revealed_j.begin(); it != revealed_j.end(); ++it)
        p.revealed[it.key()] = {get_field<std::string>(it.value(), "value"),
                                Salt::from_hex_str(get_field<std::string>(it.value(), "salt"))};
    const Json& hidden_j = j.at("hidden_commitments");
    for (auto it = hidden_j.begin(); it != hidden_j.end(); ++it)
        p.hidden_commitments[it.key()] = Digest::from_hex_str(it.value().get<std::string>());
    p.core = PresentationCore::from_json(j.at("core"));
    p.challenge_nonce = Nonce::from_hex_str(get_field<std::string>(j, "challenge_nonce"));
    p.holder_signature =
        crypto::Signature::from_hex_str(get_field<std::string>(j, "holder_signature"));
    return p;
}

const char* to_string(VerifyFail f) {
    switch (f) {
        case VerifyFail::none: return "none";
        case VerifyFail::subject_not_found: return "subject-not-found";
        case VerifyFail::revoked_subject: return "revoked-subject";
        case VerifyFail::bad_holder_signature: return "bad-holder-signature";
        case VerifyFail::issuer_not_found: return "issuer-not-found";
        case VerifyFail::revoked_issuer: return "revoked-issuer";
        case VerifyFail::untrusted_issuer: return "untrusted-issuer";
        case VerifyFail::unknown_cred_def: return "unknown-cred-def";
        case VerifyFail::unknown_schema: return "unknown-schema";
        case VerifyFail::attribute_coverage: return "attribute-coverage";
        case VerifyFail::commitment_mismatch: return "commitment-mismatch";
        case VerifyFail::bad_issuer_signature: return "bad-issuer-signature";
        case VerifyFail::nonce_mismatch: return "nonce-mismatch";
        case VerifyFail::stale_request: return "stale-request";
        case VerifyFail::missing_requested_attribute: return "missing-requested-attribute";
        case VerifyFail::unknown_credential: return "unknown-credential";
        case VerifyFail::revoked_credential: return "revoked-credential";
        case VerifyFail::replay: return "replay";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Operations

Digest vin_tag(ByteView vin_index_key, std::string_view vin) {
    Bytes data = concat({as_bytes("vin-index:"), as_bytes(vin)});
    return crypto::digest_keyed(vin_index_key, data);
}

SchemaWithTxn schema_gen(const crypto::KeyPair& registrar, const Did& registrar_did,
                         const std::string& name, const std::string& version,
                         const std::vector<std::string>& attribute_names, Rng& rng,
                         std::int64_t now_s) {
    if (attribute_names.empty()) throw Error("schema needs at least one attribute");
    std::set<std::string> unique(attribute_names.begin(), attribute_names.end());
    if (unique.size() != attribute_names.size())
        throw Error("schema attribute names must be duplicate-free");

    Schema s;
    s.name = name;
    s.version = version;
    s.attribute_names = attribute_names;
    s.issuer = registrar_did;
    s.signature = crypto::sign(registrar.secret_key, canonical_bytes(s.body_json()));

    Json payload{{"schema", s.to_json()}};
    auto txn = ledger::make_txn(ledger::TxnKind::schema, std::move(payload), registrar_did,
                                registrar.secret_key, rng, now_s);
    return {std::move(s), std::move(txn)};
}

CredDefWithTxn def_gen(const crypto::KeyPair& registrar, const Did& registrar_did,
                       const Schema& schema, Rng& rng, std::int64_t now_s) {
    CredentialDefinition d;
    d.schema_ref = schema.digest();
    d.issuer = registrar_did;
    d.issuer_public_key = registrar.public_key;
    d.signature = crypto::sign(registrar.secret_key, canonical_bytes(d.body_json()));

    Json payload{{"cred_def", d.to_json()}};
    auto txn = ledger::make_txn(ledger::TxnKind::cred_def, std::move(payload), registrar_did,
                                registrar.secret_key, rng, now_s);
    return {std::move(d), std::move(txn)};
}

IssuedCredential issue_credential(const crypto::KeyPair& registrar, const Did& registrar_did,
                                  const CredentialDefinition& cred_def, const Schema& schema,
                                  const Did& subject, const crypto::PublicKey& subject_pk,
                                  const std::map<std::string, std::string>& attributes,
                                  ByteView vin_index_key, Rng& rng, std::int64_t now_s) {
    const bool has_vin_attr =
        std::find(schema.attribute_names.begin(), schema.attribute_names.end(), "VIN") !=
        schema.attribute_names.end();

    // Attribute set must match the schema exactly.
    if (attributes.size() != schema.attribute_names.size())
        throw Error("attribute set does not match schema");
    for (const auto& name : schema.attribute_names) {
        auto it = attributes.find(name);
        if (it == attributes.end()) throw Error("missing attribute: " + name);
        if (it->second.empty()) throw Error("empty value for attribute: " + name);
    }
    if (has_vin_attr && !vin_valid(attributes.at("VIN")))
        throw Error("invalid VIN: " + attributes.at("VIN"));

    ClaimSet claims;
    VerifiableCredential vc;
    for (const auto& [name, value] : attributes) {
        Salt salt = crypto::make_salt(rng);
        claims.claims[name] = {value, salt};
        vc.commitments[name] = attribute_commitment(salt, name, value);
    }
    vc.cred_def_ref = cred_def.digest();
    vc.issuer = registrar_did;
    vc.subject = subject;
    vc.subject_public_key = subject_pk;
    vc.issued_at = now_s;
    vc.issuer_signature = crypto::sign(registrar.secret_key, vc.signing_bytes());

    Json commits = Json::object();
    for (const auto& [name, c] : vc.commitments) commits[name] = c.hex();
    Json payload{
        {"commitment_root", vc.root().hex()},
        {"commitments", commits},
        {"cred_def_ref", vc.cred_def_ref.hex()},
        {"issued_at", vc.issued_at},
        {"issuer_signature", vc.issuer_signature.hex()},
        {"subject", subject.str()},
        {"subject_public_key", subject_pk.hex()},
    };
    if (has_vin_attr)
        payload["vin_tag"] = vin_tag(vin_index_key, attributes.at("VIN")).hex();

    auto txn = ledger::make_txn(ledger::TxnKind::cred_reg, std::move(payload), registrar_did,
                                registrar.secret_key, rng, now_s);
    return {std::move(vc), std::move(claims), std::move(txn)};
}

Presentation proof_gen(const crypto::KeyPair& holder, const VerifiableCredential& vcred,
                       const ClaimSet& claims, const ProofRequest& request) {
    if (request.requested_attributes.empty()) throw Error("empty proof request");

    Presentation p;
    for (const auto& name : request.requested_attributes) {
        auto it = claims.claims.find(name);
        if (it == claims.claims.end())
            throw Error("requested attribute not in credential: " + name);
        p.revealed[name] = it->second;
    }
    for (const auto& [name, c] : vcred.commitments)
        if (!p.revealed.count(name)) p.hidden_commitments[name] = c;

    p.core.cred_def_ref = vcred.cred_def_ref;
    p.core.issuer = vcred.issuer;
    p.core.subject = vcred.subject;
    p.core.subject_public_key = vcred.subject_public_key;
    p.core.commitment_root = vcred.root();
    p.core.issued_at = vcred.issued_at;
    p.core.issuer_signature = vcred.issuer_signature;
    p.challenge_nonce = request.nonce;
    p.holder_signature = crypto::sign(holder.secret_key, p.signing_bytes());
    return p;
}

VerifyResult verify_presentation(const ledger::Snapshot& view, const Presentation& pres,
                                 const ProofRequest& request, std::int64_t now_s) {
    using R = VerifyResult;

    // Holder binding: signature against the subject's currently active key.
    const identity::DidDocument* subject_doc = nullptr;
    try {
        subject_doc = &view.resolve(pres.core.subject);
    } catch (const Error&) {
        return R::fail(VerifyFail::subject_not_found, pres.core.subject.str());
    }
    if (subject_doc->revoked) return R::fail(VerifyFail::revoked_subject);
    if (!crypto::verify(subject_doc->active_public_key, pres.signing_bytes(),
                        pres.holder_signature))
        return R::fail(VerifyFail::bad_holder_signature);

    // Issuer standing.
    const identity::DidDocument* issuer_doc = nullptr;
    try {
        issuer_doc = &view.resolve(pres.core.issuer);
    } catch (const Error&) {
        return R::fail(VerifyFail::issuer_not_found, pres.core.issuer.str());
    }
    if (issuer_doc->revoked) return R::fail(VerifyFail::revoked_issuer);
    if (!view.is_registrar(pres.core.issuer)) return R::fail(VerifyFail::untrusted_issuer);

    // Schema coverage: revealed and hidden together are exactly the schema.
    const credentials::CredentialDefinition* def = nullptr;
    try {
        def = &view.cred_def(pres.core.cred_def_ref);
    } catch (const Error&) {
        return R::fail(VerifyFail::unknown_cred_def);
    }
    const Schema* schema = nullptr;
    try {
        schema = &view.schema(def->schema_ref);
    } catch (const Error&) {
        return R::fail(VerifyFail::unknown_schema);
    }
    std::set<std::string> covered;
    for (const auto& [name, vs] : pres.revealed) covered.insert(name);
    for (const auto& [name, c] : pres.hidden_commitments) {
        if (!covered.insert(name).second)
            return R::fail(VerifyFail::attribute_coverage, "attribute both revealed and hidden");
    }
    std::set<std::string> expected(schema->attribute_names.begin(),
                                   schema->attribute_names.end());
    if (covered != expected) return R::fail(VerifyFail::attribute_coverage);

    // Commitments: revealed pairs re-hash to commitments; the root over all
    // commitments must equal the signed root.
    std::map<std::string, Digest> all;
    for (const auto& [name, vs] : pres.revealed)
        all[name] = attribute_commitment(vs.second, name, vs.first);
    for (const auto& [name, c] : pres.hidden_commitments) all[name] = c;
    if (commitment_root(all) != pres.core.commitment_root)
        return R::fail(VerifyFail::commitment_mismatch);

    // Issuer signature against the issuer's key at issuance time.
    auto issuer_key = issuer_doc->key_at(pres.core.issued_at);
    if (!issuer_key) return R::fail(VerifyFail::bad_issuer_signature, "issuer key not yet valid");
    Bytes issuer_signed = canonical_bytes(Json{
        {"commitment_root", pres.core.commitment_root.hex()},
        {"cred_def_ref", pres.core.cred_def_ref.hex()},
        {"issued_at", pres.core.issued_at},
        {"subject", pres.core.subject.str()},
        {"subject_public_key", pres.core.subject_public_key.hex()},
    });
    if (!crypto::verify(*issuer_key, issuer_signed, pres.core.issuer_signature))
        return R::fail(VerifyFail::bad_issuer_signature);

    // Challenge binding and freshness.
    if (pres.challenge_nonce != request.nonce) return R::fail(VerifyFail::nonce_mismatch);
    if (std::abs(now_s - request.issued_at) > ledger::kTimestampWindowS)
        return R::fail(VerifyFail::stale_request);

    // Every requested attribute must be revealed.
    for (const auto& name : request.requested_attributes)
        if (!pres.revealed.count(name))
            return R::fail(VerifyFail::missing_requested_attribute, name);

    // Credential registration and revocation status.
    if (!view.has_credential(pres.core.commitment_root))
        return R::fail(VerifyFail::unknown_credential);
    if (view.credential(pres.core.commitment_root).revoked)
        return R::fail(VerifyFail::revoked_credential);

    return R::success();
}

ledger::Transaction revoke_credential(const crypto::KeyPair& registrar,
                                      const Did& registrar_did, const Digest& root, Rng& rng,
                                      std::int64_t now_s) {
    Json payload{{"commitment_root", root.hex()}};
    return ledger::make_txn(ledger::TxnKind::cred_revoke, std::move(payload), registrar_did,
                            registrar.secret_key, rng, now_s);
}

}  // namespace vdkms::credentials
