#include "vdkms/protocols.hpp"

#include <algorithm>

#include "vdkms/vin.hpp"

namespace vdkms::protocols {

using ledger::kTimestampWindowS;

// ---------------------------------------------------------------------------
// Envelope

Bytes Envelope::header_aad() const {
    return canonical_bytes(Json{
        {"nonce", nonce.hex()},
        {"recipient", recipient.str()},
        {"sender", sender.str()},
        {"timestamp", timestamp},
    });
}

Bytes Envelope::signing_bytes() const {
    Json j{
        {"nonce", nonce.hex()},
        {"recipient", recipient.str()},
        {"sealed", sealed},
        {"sender", sender.str()},
        {"timestamp", timestamp},
    };
    if (sealed)
        j["sealed_body"] = to_hex(sealed_body);
    else
        j["body"] = body;
    return canonical_bytes(j);
}

Json Envelope::to_json() const {
    Json j{
        {"nonce", nonce.hex()},
        {"recipient", recipient.str()},
        {"sealed", sealed},
        {"sender", sender.str()},
        {"signature", signature.hex()},
        {"timestamp", timestamp},
    };
    if (sealed)
        j["sealed_body"] = to_hex(sealed_body);
    else
        j["body"] = body;
    return j;
}

Envelope Envelope::from_json(const Json& j) {
    Envelope e;
    e.sender = identity::Did::parse(get_field<std::string>(j, "sender"));
    e.recipient = identity::Did::parse(get_field<std::string>(j, "recipient"));
    e.nonce = Nonce::from_hex_str(get_field<std::string>(j, "nonce"));
    e.timestamp = get_field<std::int64_t>(j, "timestamp");
    e.sealed = get_field<bool>(j, "sealed");
    if (e.sealed)
        e.sealed_body = from_hex(get_field<std::string>(j, "sealed_body"));
    else
        e.body = j.at("body");
    e.signature = crypto::Signature::from_hex_str(get_field<std::string>(j, "signature"));
    return e;
}

// ---------------------------------------------------------------------------
// ReplayCache

bool ReplayCache::check_and_insert(const Did& sender, const Nonce& nonce, std::int64_t msg_ts) {
    Digest key = crypto::digest(concat({as_bytes(sender.str()), nonce.view()}));
    auto [it, inserted] = entries_.emplace(key, msg_ts);
    return inserted;
}

void ReplayCache::purge(std::int64_t now_s) {
    // Entries older than the acceptance window can never replay successfully;
    // the timestamp check alone rejects them.
    for (auto it = entries_.begin(); it != entries_.end();)
        it = (now_s - it->second > 2 * kTimestampWindowS) ? entries_.erase(it) : ++it;
}

// ---------------------------------------------------------------------------
// Microledger

Bytes MicroledgerTxn::signing_bytes() const {
    return canonical_bytes(Json{
        {"author", author.str()},
        {"created_at", created_at},
        {"first", first.str()},
        {"prev", prev.hex()},
        {"second", second.str()},
    });
}

Digest MicroledgerTxn::digest() const { return crypto::digest(canonical_bytes(to_json())); }

Json MicroledgerTxn::to_json() const {
    return Json{
        {"author", author.str()},
        {"author_signature", author_signature.hex()},
        {"created_at", created_at},
        {"first", first.str()},
        {"prev", prev.hex()},
        {"second", second.str()},
    };
}

MicroledgerTxn MicroledgerTxn::from_json(const Json& j) {
    MicroledgerTxn t;
    t.first = Did::parse(get_field<std::string>(j, "first"));
    t.second = Did::parse(get_field<std::string>(j, "second"));
    t.created_at = get_field<std::int64_t>(j, "created_at");
    t.prev = Digest::from_hex_str(get_field<std::string>(j, "prev"));
    t.author = Did::parse(get_field<std::string>(j, "author"));
    t.author_signature =
        crypto::Signature::from_hex_str(get_field<std::string>(j, "author_signature"));
    return t;
}

void Microledger::append(const Did& first, const Did& second, const PeerDid& author,
                         std::int64_t now_s) {
    MicroledgerTxn t;
    t.first = first;
    t.second = second;
    t.created_at = now_s;
    t.prev = head_;
    t.author = author.did;
    t.author_signature = crypto::sign(author.pairwise_keypair.secret_key, t.signing_bytes());
    head_ = t.digest();
    entries_.push_back(std::move(t));
}

MicroledgerCheck Microledger::verify(
    const std::function<std::optional<crypto::PublicKey>(const Did&)>& key_of) const {
    Digest prev{};  // zero for the first entry
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.prev != prev) return {false, i, "chain break"};
        auto key = key_of(e.author);
        if (!key) return {false, i, "unknown author key"};
        if (!crypto::verify(*key, e.signing_bytes(), e.author_signature))
            return {false, i, "bad signature"};
        prev = e.digest();
    }
    if (prev != head_ && !entries_.empty()) return {false, entries_.size() - 1, "head mismatch"};
    return {};
}

Json Microledger::to_json() const {
    Json arr = Json::array();
    for (const auto& e : entries_) arr.push_back(e.to_json());
    return Json{{"entries", arr}, {"head", head_.hex()}};
}

Microledger Microledger::from_json(const Json& j) {
    Microledger ml;
    for (const auto& e : j.at("entries")) ml.entries_.push_back(MicroledgerTxn::from_json(e));
    ml.head_ = Digest::from_hex_str(get_field<std::string>(j, "head"));
    return ml;
}

// ---------------------------------------------------------------------------
// Channels

Envelope channel_send(SessionChannel& ch, const Json& payload, std::int64_t now_s, Rng& rng) {
    ch.send_counter += 1;
    Envelope env;
    env.sender = ch.local.did;
    env.recipient = ch.remote_did;
    env.nonce = crypto::make_nonce(rng);
    env.timestamp = now_s;
    env.sealed = true;

    Json inner{{"counter", ch.send_counter}, {"payload", payload}};
    env.sealed_body = crypto::seal(ch.local.pairwise_keypair.secret_key, ch.remote_pk,
                                   canonical_bytes(inner), env.header_aad(), rng);
    env.signature = crypto::sign(ch.local.pairwise_keypair.secret_key, env.signing_bytes());
    return env;
}

ChannelRecv channel_recv(SessionChannel& ch, const Envelope& env, std::int64_t now_s) {
    ChannelRecv out;
    if (env.recipient != ch.local.did) {
        out.reason = "wrong recipient";
        return out;
    }
    if (env.sender != ch.remote_did) {
        out.reason = "unknown peer";
        return out;
    }
    if (std::abs(now_s - env.timestamp) > kTimestampWindowS) {
        out.reason = "stale timestamp";
        return out;
    }
    if (!env.sealed) {
        out.reason = "channel payload must be sealed";
        return out;
    }
    if (!crypto::verify(ch.remote_pk, env.signing_bytes(), env.signature)) {
        out.reason = "bad signature";
        return out;
    }
    if (!ch.seen.check_and_insert(env.sender, env.nonce, env.timestamp)) {
        out.reason = "replay";
        return out;
    }

    Bytes plain;
    try {
        plain = crypto::open(ch.local.pairwise_keypair.secret_key, ch.remote_pk,
                             env.sealed_body, env.header_aad());
    } catch (const CryptoError&) {
        out.reason = "decrypt-auth failure";
        return out;
    }
    Json inner = Json::parse(as_string(plain), nullptr, false);
    if (inner.is_discarded()) {
        out.reason = "malformed payload";
        return out;
    }
    std::uint64_t counter = get_field<std::uint64_t>(inner, "counter");
    if (counter <= ch.recv_counter) {
        out.reason = "counter regression";
        return out;
    }
    ch.recv_counter = counter;
    out.ok = true;
    out.payload = inner.at("payload");
    return out;
}

// ---------------------------------------------------------------------------
// Agent base

Agent::Agent(Wallet wallet, LedgerClient& client, Rng& rng)
    : wallet_(std::move(wallet)), client_(client), rng_(rng) {}

void Agent::ensure_provisioned() {
    if (wallet_.has("keys")) {
        keys_ = wallet_.keypair("keys");
    } else {
        keys_ = crypto::keygen(rng_);
        wallet_.put_keypair("keys", keys_);
    }
    did_ = identity::did_from_key(keys_.public_key);
    wallet_.put("did", did_.str());

    try {
        client_.snapshot().resolve(did_);
        return;  // already registered
    } catch (const NotFoundError&) {
    }
    auto txn = ledger::make_did_reg(keys_, false, rng_, client_.now_s());
    auto outcome = client_.submit(txn);
    if (!outcome.committed)
        throw Error("DID registration failed: " + outcome.reason);
}

Envelope Agent::make_envelope(const Did& recipient, Json body, bool seal) {
    Envelope env;
    env.sender = did_;
    env.recipient = recipient;
    env.nonce = crypto::make_nonce(rng_);
    env.timestamp = client_.now_s();
    env.sealed = seal;
    if (seal) {
        crypto::PublicKey rk = resolve_key(recipient);
        env.sealed_body =
            crypto::seal(keys_.secret_key, rk, canonical_bytes(body), env.header_aad(), rng_);
    } else {
        env.body = std::move(body);
    }
    env.signature = crypto::sign(keys_.secret_key, env.signing_bytes());
    return env;
}

Agent::Accepted Agent::accept_envelope(const Envelope& env) {
    Accepted out;
    if (env.recipient != did_) {
        out.reason = "not addressed to this agent";
        return out;
    }
    std::int64_t now = client_.now_s();
    if (std::abs(now - env.timestamp) > kTimestampWindowS) {
        out.reason = "stale timestamp";
        return out;
    }

    crypto::PublicKey sender_key;
    try {
        const auto& doc = client_.snapshot().resolve(env.sender);
        if (doc.revoked) {
            out.reason = "sender DID revoked";
            return out;
        }
        sender_key = doc.active_public_key;
    } catch (const Error&) {
        out.reason = "sender DID unresolvable";
        return out;
    }
    if (!crypto::verify(sender_key, env.signing_bytes(), env.signature)) {
        out.reason = "bad signature";
        return out;
    }
    if (!replay_.check_and_insert(env.sender, env.nonce, env.timestamp)) {
        out.reason = "replay";
        return out;
    }
    replay_.purge(now);

    if (env.sealed) {
        Bytes plain;
        try {
            plain = crypto::open(keys_.secret_key, sender_key, env.sealed_body,
                                 env.header_aad());
        } catch (const CryptoError&) {
            out.reason = "decrypt-auth failure";
            return out;
        }
        out.body = Json::parse(as_string(plain), nullptr, false);
        if (out.body.is_discarded()) {
            out.reason = "malformed sealed body";
            return out;
        }
    } else {
        out.body = env.body;
    }
    out.ok = true;
    return out;
}

crypto::PublicKey Agent::resolve_key(const Did& did) const {
    return client_.snapshot().resolve(did).active_public_key;
}

// ---------------------------------------------------------------------------
// RegistrarAgent

RegistrarAgent::RegistrarAgent(Wallet wallet, LedgerClient& client, Rng& rng,
                               const std::string& schema_name,
                               const std::string& schema_version,
                               const std::vector<std::string>& attributes)
    : Agent(std::move(wallet), client, rng) {
    if (std::find(attributes.begin(), attributes.end(), "VIN") == attributes.end())
        throw Error("vehicle schema must include a VIN attribute");

    ensure_provisioned();
    auto snap = client_.snapshot();
    if (!snap.is_registrar(did_))
        throw Error("DID is not a consortium registrar: " + did_.str());

    if (auto existing = snap.schema_by_name(schema_name, schema_version)) {
        schema_ = snap.schema(*existing);
        if (schema_.issuer != did_)
            throw Error("schema name/version owned by another registrar");
    } else {
        auto made = credentials::schema_gen(keys_, did_, schema_name, schema_version, attributes,
                                            rng_, client_.now_s());
        auto outcome = client_.submit(made.txn);
        if (!outcome.committed) throw Error("schema registration failed: " + outcome.reason);
        schema_ = std::move(made.schema);
    }

    snap = client_.snapshot();
    Digest schema_digest = schema_.digest();
    bool def_found = false;
    for (const auto& [d, def] : snap.state().cred_defs) {
        if (def.schema_ref == schema_digest && def.issuer == did_) {
            cred_def_ = def;
            def_found = true;
            break;
        }
    }
    if (!def_found) {
        auto made = credentials::def_gen(keys_, did_, schema_, rng_, client_.now_s());
        auto outcome = client_.submit(made.txn);
        if (!outcome.committed) throw Error("cred-def registration failed: " + outcome.reason);
        cred_def_ = std::move(made.definition);
    }

    wallet_.put("schema", schema_.to_json());
    wallet_.put("cred_def", cred_def_.to_json());
}

credentials::IssuedCredential RegistrarAgent::issue(
    const Did& subject, const crypto::PublicKey& subject_pk,
    const std::map<std::string, std::string>& attributes) {
    auto snap = client_.snapshot();
    auto issued =
        credentials::issue_credential(keys_, did_, cred_def_, schema_, subject, subject_pk,
                                      attributes, snap.vin_index_key().view(), rng_,
                                      client_.now_s());
    auto outcome = client_.submit(issued.txn);
    if (!outcome.committed) throw Error(outcome.reason);
    return issued;
}

LedgerClient::SubmitOutcome RegistrarAgent::revoke_credential(const Digest& commitment_root) {
    auto txn =
        credentials::revoke_credential(keys_, did_, commitment_root, rng_, client_.now_s());
    return client_.submit(txn);
}

LedgerClient::SubmitOutcome RegistrarAgent::revoke_did(const Did& target) {
    auto txn = identity::revoke_did(keys_, did_, target, rng_, client_.now_s());
    return client_.submit(txn);
}

std::vector<Envelope> RegistrarAgent::handle(const Envelope& env) {
    auto acc = accept_envelope(env);
    if (!acc.ok) return {};
    const std::string type = get_field<std::string>(acc.body, "type");
    if (type != "register") return {};

    std::map<std::string, std::string> attributes;
    try {
        for (auto it = acc.body.at("attributes").begin(); it != acc.body.at("attributes").end();
             ++it)
            attributes[it.key()] = it.value().get<std::string>();
    } catch (const Json::exception&) {
        return {make_envelope(env.sender, Json{{"type", "register_fail"},
                                               {"reason", "malformed attributes"}},
                              true)};
    }

    try {
        crypto::PublicKey subject_pk = resolve_key(env.sender);
        auto issued = issue(env.sender, subject_pk, attributes);
        Json ok{{"type", "register_ok"},
                {"credential", issued.credential.to_json()},
                {"claims", issued.claims.to_json()}};
        return {make_envelope(env.sender, std::move(ok), true)};
    } catch (const Error& e) {
        return {make_envelope(env.sender, Json{{"type", "register_fail"}, {"reason", e.what()}},
                              true)};
    }
}

// ---------------------------------------------------------------------------
// VehicleAgent

VehicleAgent::VehicleAgent(Wallet wallet, LedgerClient& client, Rng& rng)
    : Agent(std::move(wallet), client, rng) {
    ensure_provisioned();
    if (wallet_.has("credential")) {
        credential_ = credentials::VerifiableCredential::from_json(wallet_.get("credential"));
        claims_ = credentials::ClaimSet::from_json(wallet_.get("claims"));
        has_credential_ = true;
    }
}

Envelope VehicleAgent::registration_request(const Did& registrar,
                                            const std::map<std::string, std::string>& attributes) {
    if (!attributes.count("VIN")) throw Error("registration request requires a VIN attribute");
    Json attrs = Json::object();
    for (const auto& [k, v] : attributes) attrs[k] = v;
    return make_envelope(registrar, Json{{"type", "register"}, {"attributes", attrs}}, true);
}

bool VehicleAgent::has_credential() const { return has_credential_; }

const credentials::VerifiableCredential& VehicleAgent::credential() const {
    if (!has_credential_) throw NotFoundError("vehicle holds no credential");
    return credential_;
}

const credentials::ClaimSet& VehicleAgent::claims() const {
    if (!has_credential_) throw NotFoundError("vehicle holds no credential");
    return claims_;
}

LedgerClient::SubmitOutcome VehicleAgent::rotate_key() {
    auto fresh = crypto::keygen(rng_);
    auto txn = identity::rotate_key(keys_, did_, fresh.public_key, rng_, client_.now_s());
    auto outcome = client_.submit(txn);
    if (outcome.committed) {
        keys_ = fresh;
        wallet_.put_keypair("keys", keys_);
    }
    return outcome;
}

Envelope VehicleAgent::authorization_request(const Did& provider) {
    PeerDid pairwise = identity::make_peer_did(rng_, provider);
    pairwise_by_provider_[provider] = pairwise;
    Json body{{"type", "authorize"},
              {"vehicle_peer_did", pairwise.did.str()},
              {"vehicle_peer_pk", pairwise.pairwise_keypair.public_key.hex()}};
    return make_envelope(provider, std::move(body), true);
}

SessionChannel* VehicleAgent::channel_to(const Did& provider) {
    auto it = channels_.find(provider);
    return it == channels_.end() ? nullptr : &it->second;
}

std::optional<crypto::PublicKey> VehicleAgent::pairwise_key_of(const Did& peer_did) const {
    for (const auto& [provider, peer] : pairwise_by_provider_)
        if (peer.did == peer_did) return peer.pairwise_keypair.public_key;
    return std::nullopt;
}

std::vector<Envelope> VehicleAgent::handle(const Envelope& env) {
    auto acc = accept_envelope(env);
    if (!acc.ok) return {};
    const std::string type = get_field<std::string>(acc.body, "type");

    if (type == "register_ok") {
        credential_ = credentials::VerifiableCredential::from_json(acc.body.at("credential"));
        claims_ = credentials::ClaimSet::from_json(acc.body.at("claims"));
        has_credential_ = true;
        wallet_.put("credential", credential_.to_json());
        wallet_.put("claims", claims_.to_json());
        return {};
    }
    if (type == "register_fail") {
        last_error_ = get_field<std::string>(acc.body, "reason");
        return {};
    }
    if (type == "proof_request") {
        auto request = credentials::ProofRequest::from_json(acc.body.at("request"));
        if (!has_credential_)
            return {make_envelope(env.sender, Json{{"type", "presentation_fail"},
                                                   {"reason", "no credential held"}},
                                  true)};
        try {
            auto pres = credentials::proof_gen(keys_, credential_, claims_, request);
            return {make_envelope(env.sender, Json{{"type", "presentation"},
                                                   {"presentation", pres.to_json()}},
                                  true)};
        } catch (const Error& e) {
            return {make_envelope(env.sender, Json{{"type", "presentation_fail"},
                                                   {"reason", e.what()}},
                                  true)};
        }
    }
    if (type == "authorize_ok") {
        auto it = pairwise_by_provider_.find(env.sender);
        if (it == pairwise_by_provider_.end()) return {};
        Did provider_peer =
            Did::parse(get_field<std::string>(acc.body, "provider_peer_did"));
        auto provider_pk = crypto::PublicKey::from_hex_str(
            get_field<std::string>(acc.body, "provider_peer_pk"));

        microledger_.append(did_, provider_peer, it->second, client_.now_s());

        SessionChannel ch;
        ch.local = it->second;
        ch.remote_did = provider_peer;
        ch.remote_pk = provider_pk;
        channels_[env.sender] = std::move(ch);
        return {};
    }
    if (type == "authorize_fail") {
        last_error_ = get_field<std::string>(acc.body, "reason");
        return {};
    }
    return {};
}

// ---------------------------------------------------------------------------
// ProviderAgent

ProviderAgent::ProviderAgent(Wallet wallet, LedgerClient& client, Rng& rng)
    : Agent(std::move(wallet), client, rng) {
    ensure_provisioned();
}

Envelope ProviderAgent::proof_request(const Did& vehicle,
                                      const std::vector<std::string>& attributes) {
    if (attributes.empty()) throw Error("proof request needs at least one attribute");
    credentials::ProofRequest req;
    req.requested_attributes = attributes;
    req.nonce = crypto::make_nonce(rng_);
    req.verifier = did_;
    req.issued_at = client_.now_s();
    outstanding_[req.nonce] = req;
    return make_envelope(vehicle, Json{{"type", "proof_request"}, {"request", req.to_json()}},
                         false);
}

std::optional<credentials::VerifyResult> ProviderAgent::verification_of(
    const Did& vehicle) const {
    auto it = verification_results_.find(vehicle);
    if (it == verification_results_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::map<std::string, std::string>> ProviderAgent::revealed_of(
    const Did& vehicle) const {
    auto it = revealed_.find(vehicle);
    if (it == revealed_.end()) return std::nullopt;
    return it->second;
}

SessionChannel* ProviderAgent::channel_to(const Did& vehicle_peer_did) {
    auto it = channels_.find(vehicle_peer_did);
    return it == channels_.end() ? nullptr : &it->second;
}

std::optional<crypto::PublicKey> ProviderAgent::pairwise_key_of(const Did& peer_did) const {
    for (const auto& [vp, peer] : pairwise_by_vehicle_peer_)
        if (peer.did == peer_did) return peer.pairwise_keypair.public_key;
    return std::nullopt;
}

std::vector<Envelope> ProviderAgent::handle(const Envelope& env) {
    auto acc = accept_envelope(env);
    if (!acc.ok) return {};
    const std::string type = get_field<std::string>(acc.body, "type");

    if (type == "presentation") {
        using credentials::VerifyFail;
        using credentials::VerifyResult;
        auto pres = credentials::Presentation::from_json(acc.body.at("presentation"));
        VerifyResult result;

        auto req_it = outstanding_.find(pres.challenge_nonce);
        if (req_it == outstanding_.end()) {
            bool burnt = !presentation_nonces_.check_and_insert(did_, pres.challenge_nonce,
                                                                env.timestamp);
            result = VerifyResult::fail(burnt ? VerifyFail::replay : VerifyFail::nonce_mismatch);
        } else if (pres.core.subject != env.sender) {
            result = VerifyResult::fail(VerifyFail::bad_holder_signature,
                                        "presenter is not the credential subject");
        } else {
            result = credentials::verify_presentation(client_.snapshot(), pres, req_it->second,
                                                      client_.now_s());
            if (result.ok) {
                // Single-use challenge: burn the nonce.
                presentation_nonces_.check_and_insert(did_, pres.challenge_nonce, env.timestamp);
                outstanding_.erase(req_it);
                verified_at_[env.sender] = client_.now_s();
                std::map<std::string, std::string> values;
                for (const auto& [name, vs] : pres.revealed) values[name] = vs.first;
                revealed_[env.sender] = std::move(values);
            }
        }
        verification_results_[env.sender] = result;
        Json reply{{"type", "verify_result"},
                   {"ok", result.ok},
                   {"reason", credentials::to_string(result.reason)}};
        return {make_envelope(env.sender, std::move(reply), false)};
    }

    if (type == "presentation_fail") {
        verification_results_[env.sender] = credentials::VerifyResult::fail(
            credentials::VerifyFail::missing_requested_attribute,
            get_field<std::string>(acc.body, "reason"));
        return {};
    }

    if (type == "authorize") {
        auto verified = verified_at_.find(env.sender);
        bool fresh = verified != verified_at_.end() &&
                     client_.now_s() - verified->second <= kTimestampWindowS;
        if (!fresh)
            return {make_envelope(env.sender, Json{{"type", "authorize_fail"},
                                                   {"reason", "credentials verification required"}},
                                  true)};

        Did vehicle_peer = Did::parse(get_field<std::string>(acc.body, "vehicle_peer_did"));
        auto vehicle_peer_pk = crypto::PublicKey::from_hex_str(
            get_field<std::string>(acc.body, "vehicle_peer_pk"));

        PeerDid ours = identity::make_peer_did(rng_, vehicle_peer);
        pairwise_by_vehicle_peer_[vehicle_peer] = ours;
        microledger_.append(ours.did, env.sender, ours, client_.now_s());

        SessionChannel ch;
        ch.local = ours;
        ch.remote_did = vehicle_peer;
        ch.remote_pk = vehicle_peer_pk;
        channels_[vehicle_peer] = std::move(ch);

        Json body{{"type", "authorize_ok"},
                  {"provider_peer_did", ours.did.str()},
                  {"provider_peer_pk", ours.pairwise_keypair.public_key.hex()}};
        return {make_envelope(env.sender, std::move(body), true)};
    }
    return {};
}

// ---------------------------------------------------------------------------
// Workflow drivers

RegistrationOutcome register_vehicle(VehicleAgent& vehicle, RegistrarAgent& registrar,
                                     const std::map<std::string, std::string>& attributes) {
    Envelope request = vehicle.registration_request(registrar.did(), attributes);
    for (const auto& reply : registrar.handle(request)) vehicle.handle(reply);
    if (vehicle.has_credential()) return {true, {}};
    return {false, vehicle.last_error().empty() ? "no response" : vehicle.last_error()};
}

credentials::VerifyResult verify_credentials(VehicleAgent& vehicle, ProviderAgent& provider,
                                             const std::vector<std::string>& attributes) {
    Envelope challenge = provider.proof_request(vehicle.did(), attributes);
    for (const auto& reply : vehicle.handle(challenge))
        for (const auto& final : provider.handle(reply)) vehicle.handle(final);
    auto result = provider.verification_of(vehicle.did());
    if (!result)
        return credentials::VerifyResult::fail(credentials::VerifyFail::nonce_mismatch,
                                               "no verification outcome recorded");
    return *result;
}

AuthorizeOutcome authorize(VehicleAgent& vehicle, ProviderAgent& provider) {
    AuthorizeOutcome out;
    auto vr = verify_credentials(vehicle, provider);
    if (!vr.ok) {
        out.reason = std::string("verification failed: ") + credentials::to_string(vr.reason);
        return out;
    }
    Envelope request = vehicle.authorization_request(provider.did());
    for (const auto& reply : provider.handle(request)) vehicle.handle(reply);

    SessionChannel* vch = vehicle.channel_to(provider.did());
    if (!vch) {
        out.reason = vehicle.last_error().empty() ? "authorization did not complete"
                                                  : vehicle.last_error();
        return out;
    }
    out.ok = true;
    out.vehicle_peer_did = vch->local.did;
    out.provider_peer_did = vch->remote_did;
    return out;
}

}  // namespace vdkms::protocols
