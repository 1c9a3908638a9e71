#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vdkms/credentials.hpp"
#include "vdkms/identity.hpp"
#include "vdkms/json.hpp"
#include "vdkms/txn.hpp"

namespace vdkms::ledger {

using identity::Did;
using identity::DidDocument;

struct NodeIdentity {
    std::uint32_t id = 0;
    crypto::PublicKey public_key;
};

/// Out-of-band consortium bootstrap: registrar roles, consensus node keys,
/// and the keyed-digest key for the VIN uniqueness index.
struct GenesisConfig {
    std::vector<std::pair<Did, crypto::PublicKey>> registrars;
    std::vector<NodeIdentity> nodes;
    Digest vin_index_key;  // 32-byte keyed-digest key

    Json to_json() const;
    static GenesisConfig from_json(const Json& j);
};

struct Block {
    std::uint64_t height = 0;
    Digest prev_hash;
    Json genesis = Json::object();  // nonempty only at height 0
    std::vector<Transaction> txns;
    Digest state_root;

    Digest digest() const;
    Json to_json() const;
    static Block from_json(const Json& j);
};

struct RejectedTxn {
    Digest txn;
    std::string reason;
};

struct CredentialEntry {
    Did subject;
    Did issuer;
    Digest vin_tag;
    bool revoked = false;
};

/// Replicated state. A pure value: apply_block() returns a new copy, and
/// identical block sequences yield identical state roots on every replica.
class LedgerState {
public:
    std::map<Did, DidDocument> did_documents;
    std::map<Digest, credentials::Schema> schemas;       // by schema digest
    std::map<Digest, credentials::CredentialDefinition> cred_defs;
    std::map<Digest, CredentialEntry> cred_registry;     // by commitment root
    std::map<std::pair<std::string, std::string>, Digest> schema_index;  // (name,version)->digest
    std::set<Digest> vin_index;                          // live keyed VIN tags
    std::set<Did> registrars;
    std::set<Digest> used_nonces;                        // digest(author || nonce)
    std::vector<NodeIdentity> nodes;
    Digest vin_index_key;
    std::uint64_t height = 0;
    Digest last_block_hash;
    std::uint64_t rejected_in_blocks = 0;

    Json to_json() const;
    static LedgerState from_json(const Json& j);
    /// Digest of the canonical serialization of the data maps (height and
    /// block linkage excluded, so an empty block leaves the root unchanged).
    Digest state_root() const;
};

/// Genesis block embedding the bootstrap config.
Block make_genesis_block(const GenesisConfig& config);
/// State after applying the genesis block.
LedgerState genesis_state(const Block& genesis_block);

struct ValidationResult {
    bool ok = false;
    std::string reason;

    static ValidationResult accept() { return {true, {}}; }
    static ValidationResult reject(std::string r) { return {false, std::move(r)}; }
};

/// Full admission check: signature, nonce uniqueness, permissions, payload
/// checks against `state`. Freshness (|now - timestamp| <= 300 s) is checked
/// only when `now_s` is given; block application passes nullopt so replay
/// stays deterministic.
ValidationResult validate_txn(const LedgerState& state, const Transaction& txn,
                              std::optional<std::int64_t> now_s);

/// validate_txn plus in-place application when accepted; the block builder
/// and apply_block share this path so execution stays deterministic.
ValidationResult try_apply_txn(LedgerState& state, const Transaction& txn,
                               std::optional<std::int64_t> now_s);

struct ApplyResult {
    LedgerState state;
    std::vector<RejectedTxn> rejected;
};

/// Applies a block in order; invalid transactions inside a committed block
/// are skipped deterministically. Throws LedgerError on broken chain linkage
/// or a state-root mismatch.
ApplyResult apply_block(const LedgerState& state, const Block& block);

/// Immutable committed-state view; reads are stable and shareable.
class Snapshot {
public:
    Snapshot() : state_(std::make_shared<const LedgerState>()) {}
    explicit Snapshot(std::shared_ptr<const LedgerState> s) : state_(std::move(s)) {}
    explicit Snapshot(LedgerState s)
        : state_(std::make_shared<const LedgerState>(std::move(s))) {}

    const LedgerState& state() const { return *state_; }
    std::uint64_t height() const { return state_->height; }

    const DidDocument& resolve(const Did& did) const;
    const credentials::Schema& schema(const Digest& d) const;
    std::optional<Digest> schema_by_name(const std::string& name,
                                         const std::string& version) const;
    const credentials::CredentialDefinition& cred_def(const Digest& d) const;
    const CredentialEntry& credential(const Digest& root) const;
    bool has_credential(const Digest& root) const;
    bool is_registrar(const Did& did) const { return state_->registrars.count(did) != 0; }
    const Digest& vin_index_key() const { return state_->vin_index_key; }

private:
    std::shared_ptr<const LedgerState> state_;
};

/// Append-only block file: "VDKB" magic + version, then length-prefixed
/// canonical JSON blocks. State is rebuilt by replay on open.
class BlockStore {
public:
    explicit BlockStore(std::filesystem::path path);

    std::vector<Block> read_all() const;
    void append(const Block& block);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace vdkms::ledger
