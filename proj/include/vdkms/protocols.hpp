#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vdkms/cluster.hpp"
#include "vdkms/credentials.hpp"
#include "vdkms/wallet.hpp"

namespace vdkms::protocols {

using identity::Did;
using identity::PeerDid;

/// Signed transport frame. Bodies travel in clear for public exchanges and
/// AEAD-sealed for anything carrying attribute values or channel traffic;
/// the header (sender, recipient, nonce, timestamp) is the associated data.
struct Envelope {
    Did sender;
    Did recipient;
    Nonce nonce;
    std::int64_t timestamp = 0;
    bool sealed = false;
    Json body;          // when !sealed
    Bytes sealed_body;  // when sealed
    crypto::Signature signature;

    Bytes header_aad() const;
    Bytes signing_bytes() const;
    Json to_json() const;
    static Envelope from_json(const Json& j);
};

/// Duplicate-suppression cache over (sender, nonce), entries expiring with
/// the timestamp window so memory stays bounded.
class ReplayCache {
public:
    /// True if fresh (and records it); false on a replay.
    bool check_and_insert(const Did& sender, const Nonce& nonce, std::int64_t msg_ts);
    void purge(std::int64_t now_s);
    std::size_t size() const { return entries_.size(); }

private:
    std::map<Digest, std::int64_t> entries_;
};

struct MicroledgerTxn {
    Did first;
    Did second;
    std::int64_t created_at = 0;
    Digest prev;
    Did author;  // local pairwise DID whose key signed this entry
    crypto::Signature author_signature;

    Bytes signing_bytes() const;
    Digest digest() const;
    Json to_json() const;
    static MicroledgerTxn from_json(const Json& j);
};

struct MicroledgerCheck {
    bool ok = true;
    std::size_t bad_index = 0;
    std::string reason;
};

/// Hash-chained append-only log of pairwise authorization records.
class Microledger {
public:
    void append(const Did& first, const Did& second, const PeerDid& author,
                std::int64_t now_s);

    /// Walks linkage and signatures; key_of maps an entry's author DID to its
    /// verification key. Reports the first bad entry.
    MicroledgerCheck verify(
        const std::function<std::optional<crypto::PublicKey>(const Did&)>& key_of) const;

    const std::vector<MicroledgerTxn>& entries() const { return entries_; }
    const Digest& head() const { return head_; }

    Json to_json() const;
    static Microledger from_json(const Json& j);

private:
    std::vector<MicroledgerTxn> entries_;
    Digest head_;  // zero when empty
};

/// Pairwise secure channel state (one side).
struct SessionChannel {
    PeerDid local;
    Did remote_did;
    crypto::PublicKey remote_pk;
    std::uint64_t send_counter = 0;
    std::uint64_t recv_counter = 0;
    ReplayCache seen;
};

/// Seals `payload` to the remote pairwise key and advances the counter.
Envelope channel_send(SessionChannel& ch, const Json& payload, std::int64_t now_s, Rng& rng);

struct ChannelRecv {
    bool ok = false;
    std::string reason;
    Json payload;
};

/// Opens a channel envelope: decrypt, replay, window and counter checks.
ChannelRecv channel_recv(SessionChannel& ch, const Envelope& env, std::int64_t now_s);

// ---------------------------------------------------------------------------
// Agents: single-threaded actors processing one envelope at a time.

class Agent {
public:
    Agent(Wallet wallet, LedgerClient& client, Rng& rng);
    virtual ~Agent() = default;

    const Did& did() const { return did_; }
    const crypto::KeyPair& keys() const { return keys_; }
    Wallet& wallet() { return wallet_; }
    const Wallet& wallet() const { return wallet_; }

    /// Process one inbound envelope, producing any replies.
    virtual std::vector<Envelope> handle(const Envelope& env) = 0;

protected:
    /// Generates keys and DID if the wallet has none, stores them, and makes
    /// sure a DID_REG is committed. Safe to call again after a failure.
    void ensure_provisioned();

    Envelope make_envelope(const Did& recipient, Json body, bool seal);
    struct Accepted {
        bool ok = false;
        std::string reason;
        Json body;
    };
    Accepted accept_envelope(const Envelope& env);

    crypto::PublicKey resolve_key(const Did& did) const;

    Wallet wallet_;
    LedgerClient& client_;
    Rng& rng_;
    Did did_;
    crypto::KeyPair keys_;
    ReplayCache replay_;
};

/// Registrar: schema and definition publication, credential issuance over
/// registration requests, revocation.
class RegistrarAgent : public Agent {
public:
    /// Provision per the registrar workflow: key material, DID_REG, schema
    /// and definition transactions (idempotent on re-run). The registrar DID
    /// must already be a genesis registrar unless `bootstrap_keys` created it.
    RegistrarAgent(Wallet wallet, LedgerClient& client, Rng& rng, const std::string& schema_name,
                   const std::string& schema_version,
                   const std::vector<std::string>& attributes);

    std::vector<Envelope> handle(const Envelope& env) override;

    const credentials::Schema& schema() const { return schema_; }
    const credentials::CredentialDefinition& cred_def() const { return cred_def_; }

    credentials::IssuedCredential issue(const Did& subject,
                                        const crypto::PublicKey& subject_pk,
                                        const std::map<std::string, std::string>& attributes);
    LedgerClient::SubmitOutcome revoke_credential(const Digest& commitment_root);
    LedgerClient::SubmitOutcome revoke_did(const Did& target);

private:
    credentials::Schema schema_;
    credentials::CredentialDefinition cred_def_;
};

/// Vehicle: registration, selective-disclosure presentations, authorization
/// and channel endpoints.
class VehicleAgent : public Agent {
public:
    VehicleAgent(Wallet wallet, LedgerClient& client, Rng& rng);

    std::vector<Envelope> handle(const Envelope& env) override;

    Envelope registration_request(const Did& registrar,
                                  const std::map<std::string, std::string>& attributes);
    bool has_credential() const;
    const credentials::VerifiableCredential& credential() const;
    const credentials::ClaimSet& claims() const;
    const std::string& last_error() const { return last_error_; }

    /// Rotates to a fresh key pair (ROTATE transaction, wallet update).
    LedgerClient::SubmitOutcome rotate_key();

    Envelope authorization_request(const Did& provider);
    SessionChannel* channel_to(const Did& provider);
    Microledger& microledger() { return microledger_; }
    std::optional<crypto::PublicKey> pairwise_key_of(const Did& peer_did) const;

private:
    credentials::VerifiableCredential credential_;
    credentials::ClaimSet claims_;
    bool has_credential_ = false;
    std::string last_error_;
    Microledger microledger_;
    std::map<Did, PeerDid> pairwise_by_provider_;    // provider public DID -> our peer id
    std::map<Did, SessionChannel> channels_;         // provider public DID -> channel
};

/// Service provider: verification challenges and authorization grants.
class ProviderAgent : public Agent {
public:
    ProviderAgent(Wallet wallet, LedgerClient& client, Rng& rng);

    std::vector<Envelope> handle(const Envelope& env) override;

    Envelope proof_request(const Did& vehicle, const std::vector<std::string>& attributes);
    std::optional<credentials::VerifyResult> verification_of(const Did& vehicle) const;
    /// Most recent revealed attributes from a successful verification.
    std::optional<std::map<std::string, std::string>> revealed_of(const Did& vehicle) const;

    SessionChannel* channel_to(const Did& vehicle_peer_did);
    Microledger& microledger() { return microledger_; }
    std::optional<crypto::PublicKey> pairwise_key_of(const Did& peer_did) const;

private:
    std::map<Nonce, credentials::ProofRequest> outstanding_;        // open challenges
    ReplayCache presentation_nonces_;                               // consumed challenge nonces
    std::map<Did, credentials::VerifyResult> verification_results_; // by vehicle DID
    std::map<Did, std::map<std::string, std::string>> revealed_;
    std::map<Did, std::int64_t> verified_at_;                       // authorization precondition
    Microledger microledger_;
    std::map<Did, PeerDid> pairwise_by_vehicle_peer_;  // vehicle peer DID -> our peer id
    std::map<Did, SessionChannel> channels_;           // vehicle peer DID -> channel
};

// ---------------------------------------------------------------------------
// Synchronous workflow drivers (desk-scale orchestration over direct routing).

struct RegistrationOutcome {
    bool ok = false;
    std::string reason;
};

/// Fig-style registration exchange: request, validation, issuance, delivery.
RegistrationOutcome register_vehicle(VehicleAgent& vehicle, RegistrarAgent& registrar,
                                     const std::map<std::string, std::string>& attributes);

/// Challenge/present/verify exchange; the provider caches the outcome.
credentials::VerifyResult verify_credentials(VehicleAgent& vehicle, ProviderAgent& provider,
                                             const std::vector<std::string>& attributes = {
                                                 "VIN"});

struct AuthorizeOutcome {
    bool ok = false;
    std::string reason;
    Did vehicle_peer_did;   // pairwise DID the vehicle generated
    Did provider_peer_did;  // pairwise DID the provider generated
};

/// Verification followed by the pairwise-DID handshake; both sides hold an
/// open SessionChannel and one microledger entry on success.
AuthorizeOutcome authorize(VehicleAgent& vehicle, ProviderAgent& provider);

}  // namespace vdkms::protocols
