#include "vdkms/ledger.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>

namespace vdkms::ledger {

const char* to_string(TxnKind k) {
    switch (k) {
        case TxnKind::did_reg: return "DID_REG";
        case TxnKind::schema: return "SCHEMA";
        case TxnKind::cred_def: return "CRED_DEF";
        case TxnKind::cred_reg: return "CRED_REG";
        case TxnKind::cred_revoke: return "CRED_REVOKE";
        case TxnKind::did_revoke: return "DID_REVOKE";
        case TxnKind::rotate: return "ROTATE";
    }
    return "UNKNOWN";
}

TxnKind txn_kind_from_string(const std::string& s) {
    if (s == "DID_REG") return TxnKind::did_reg;
    if (s == "SCHEMA") return TxnKind::schema;
    if (s == "CRED_DEF") return TxnKind::cred_def;
    if (s == "CRED_REG") return TxnKind::cred_reg;
    if (s == "CRED_REVOKE") return TxnKind::cred_revoke;
    if (s == "DID_REVOKE") return TxnKind::did_revoke;
    if (s == "ROTATE") return TxnKind::rotate;
    throw ParseError("unknown transaction kind: " + s);
}

// ---------------------------------------------------------------------------
// Transaction

Bytes Transaction::signing_bytes() const {
    return canonical_bytes(Json{
        {"kind", to_string(kind)},
        {"nonce", nonce.hex()},
        {"payload", payload},
        {"timestamp", timestamp},
    });
}

Digest Transaction::digest() const { return crypto::digest(canonical_bytes(to_json())); }

Json Transaction::to_json() const {
    return Json{
        {"author", author.str()},
        {"author_signature", author_signature.hex()},
        {"kind", to_string(kind)},
        {"nonce", nonce.hex()},
        {"payload", payload},
        {"timestamp", timestamp},
    };
}

Transaction Transaction::from_json(const Json& j) {
    Transaction t;
    t.kind = txn_kind_from_string(get_field<std::string>(j, "kind"));
    t.payload = j.at("payload");
    t.author = Did::parse(get_field<std::string>(j, "author"));
    t.author_signature =
        crypto::Signature::from_hex_str(get_field<std::string>(j, "author_signature"));
    t.nonce = Nonce::from_hex_str(get_field<std::string>(j, "nonce"));
    t.timestamp = get_field<std::int64_t>(j, "timestamp");
    return t;
}

Transaction make_txn(TxnKind kind, Json payload, const Did& author,
                     const crypto::SecretKey& sk, Rng& rng, std::int64_t now_s) {
    Transaction t;
    t.kind = kind;
    t.payload = std::move(payload);
    t.author = author;
    t.nonce = crypto::make_nonce(rng);
    t.timestamp = now_s;
    t.author_signature = crypto::sign(sk, t.signing_bytes());
    return t;
}

Transaction make_did_reg(const crypto::KeyPair& kp, bool peer, Rng& rng, std::int64_t now_s) {
    if (peer) throw LedgerError("peer DIDs are never registered on the public ledger");
    Did did = identity::did_from_key(kp.public_key, false);
    Json payload{{"did", did.str()}, {"public_key", kp.public_key.hex()}};
    return make_txn(TxnKind::did_reg, std::move(payload), did, kp.secret_key, rng, now_s);
}

// ---------------------------------------------------------------------------
// Genesis

Json GenesisConfig::to_json() const {
    Json regs = Json::array();
    for (const auto& [did, pk] : registrars)
        regs.push_back(Json{{"did", did.str()}, {"public_key", pk.hex()}});
    Json nodes_j = Json::array();
    for (const auto& n : nodes)
        nodes_j.push_back(Json{{"id", n.id}, {"public_key", n.public_key.hex()}});
    return Json{
        {"nodes", nodes_j},
        {"registrars", regs},
        {"vin_index_key", vin_index_key.hex()},
    };
}

GenesisConfig GenesisConfig::from_json(const Json& j) {
    GenesisConfig g;
    for (const auto& r : j.at("registrars"))
        g.registrars.emplace_back(Did::parse(get_field<std::string>(r, "did")),
                                  crypto::PublicKey::from_hex_str(
                                      get_field<std::string>(r, "public_key")));
    for (const auto& n : j.at("nodes")) {
        NodeIdentity ni;
        ni.id = get_field<std::uint32_t>(n, "id");
        ni.public_key = crypto::PublicKey::from_hex_str(get_field<std::string>(n, "public_key"));
        g.nodes.push_back(ni);
    }
    g.vin_index_key = Digest::from_hex_str(get_field<std::string>(j, "vin_index_key"));
    return g;
}

// ---------------------------------------------------------------------------
// Block

Digest Block::digest() const { return crypto::digest(canonical_bytes(to_json())); }

Json Block::to_json() const {
    Json txns_j = Json::array();
    for (const auto& t : txns) txns_j.push_back(t.to_json());
    return Json{
        {"genesis", genesis},
        {"height", height},
        {"prev_hash", prev_hash.hex()},
        {"state_root", state_root.hex()},
        {"txns", txns_j},
    };
}

Block Block::from_json(const Json& j) {
    Block b;
    b.height = get_field<std::uint64_t>(j, "height");
    b.prev_hash = Digest::from_hex_str(get_field<std::string>(j, "prev_hash"));
    b.genesis = j.at("genesis");
    for (const auto& t : j.at("txns")) b.txns.push_back(Transaction::from_json(t));
    b.state_root = Digest::from_hex_str(get_field<std::string>(j, "state_root"));
    return b;
}


// ---------------------------------------------------------------------------
// LedgerState

Json LedgerState::to_json() const {
    Json docs = Json::object();
    for (const auto& [did, doc] : did_documents) docs[did.str()] = doc.to_json();
    Json schemas_j = Json::object();
    for (const auto& [d, s] : schemas) schemas_j[d.hex()] = s.to_json();
    Json defs_j = Json::object();
    for (const auto& [d, def] : cred_defs) defs_j[d.hex()] = def.to_json();
    Json creds_j = Json::object();
    for (const auto& [root, e] : cred_registry)
        creds_j[root.hex()] = Json{{"issuer", e.issuer.str()},
                                   {"revoked", e.revoked},
                                   {"subject", e.subject.str()},
                                   {"vin_tag", e.vin_tag.hex()}};
    Json vin_j = Json::array();
    for (const auto& t : vin_index) vin_j.push_back(t.hex());
    Json regs_j = Json::array();
    for (const auto& r : registrars) regs_j.push_back(r.str());
    Json nonces_j = Json::array();
    for (const auto& n : used_nonces) nonces_j.push_back(n.hex());
    Json nodes_j = Json::array();
    for (const auto& n : nodes)
        nodes_j.push_back(Json{{"id", n.id}, {"public_key", n.public_key.hex()}});
    return Json{
        {"cred_defs", defs_j},
        {"cred_registry", creds_j},
        {"did_documents", docs},
        {"height", height},
        {"last_block_hash", last_block_hash.hex()},
        {"nodes", nodes_j},
        {"registrars", regs_j},
        {"rejected_in_blocks", rejected_in_blocks},
        {"schemas", schemas_j},
        {"used_nonces", nonces_j},
        {"vin_index", vin_j},
        {"vin_index_key", vin_index_key.hex()},
    };
}

LedgerState LedgerState::from_json(const Json& j) {
    LedgerState s;
    const Json& docs = j.at("did_documents");
    for (auto it = docs.begin(); it != docs.end(); ++it) {
        auto doc = DidDocument::from_json(it.value());
        s.did_documents[doc.id] = std::move(doc);
    }
    const Json& schemas_j = j.at("schemas");
    for (auto it = schemas_j.begin(); it != schemas_j.end(); ++it) {
        auto sch = credentials::Schema::from_json(it.value());
        Digest d = Digest::from_hex_str(it.key());
        s.schema_index[{sch.name, sch.version}] = d;
        s.schemas[d] = std::move(sch);
    }
    const Json& defs_j = j.at("cred_defs");
    for (auto it = defs_j.begin(); it != defs_j.end(); ++it)
        s.cred_defs[Digest::from_hex_str(it.key())] =
            credentials::CredentialDefinition::from_json(it.value());
    const Json& creds_j = j.at("cred_registry");
    for (auto it = creds_j.begin(); it != creds_j.end(); ++it) {
        CredentialEntry e;
        e.subject = Did::parse(get_field<std::string>(it.value(), "subject"));
        e.issuer = Did::parse(get_field<std::string>(it.value(), "issuer"));
        e.vin_tag = Digest::from_hex_str(get_field<std::string>(it.value(), "vin_tag"));
        e.revoked = get_field<bool>(it.value(), "revoked");
        s.cred_registry[Digest::from_hex_str(it.key())] = e;
    }
    for (const auto& t : j.at("vin_index")) s.vin_index.insert(Digest::from_hex_str(t.get<std::string>()));
    for (const auto& r : j.at("registrars")) s.registrars.insert(Did::parse(r.get<std::string>()));
    for (const auto& n : j.at("used_nonces")) s.used_nonces.insert(Digest::from_hex_str(n.get<std::string>()));
    for (const auto& n : j.at("nodes")) {
        NodeIdentity ni;
        ni.id = get_field<std::uint32_t>(n, "id");
        ni.public_key = crypto::PublicKey::from_hex_str(get_field<std::string>(n, "public_key"));
        s.nodes.push_back(ni);
    }
    s.vin_index_key = Digest::from_hex_str(get_field<std::string>(j, "vin_index_key"));
    s.height = get_field<std::uint64_t>(j, "height");
    s.last_block_hash = Digest::from_hex_str(get_field<std::string>(j, "last_block_hash"));
    s.rejected_in_blocks = get_field<std::uint64_t>(j, "rejected_in_blocks");
    return s;
}

Digest LedgerState::state_root() const {
    Json j = to_json();
    j.erase("height");
    j.erase("last_block_hash");
    j.erase("rejected_in_blocks");
    return crypto::digest(canonical_bytes(j));
}

namespace {

LedgerState state_from_config(const GenesisConfig& config) {
    LedgerState s;
    for (const auto& [did, pk] : config.registrars) s.registrars.insert(did);
    s.nodes = config.nodes;
    s.vin_index_key = config.vin_index_key;
    return s;
}

}  // namespace

Block make_genesis_block(const GenesisConfig& config) {
    Block b;
    b.height = 0;
    b.prev_hash = Digest{};  // all zeros
    b.genesis = config.to_json();
    b.state_root = state_from_config(config).state_root();
    return b;
}

LedgerState genesis_state(const Block& genesis_block) {
    if (genesis_block.height != 0) throw LedgerError("genesis block must have height 0");
    GenesisConfig config = GenesisConfig::from_json(genesis_block.genesis);
    LedgerState s = state_from_config(config);
    if (s.state_root() != genesis_block.state_root)
        throw LedgerError("genesis state root mismatch");
    s.height = 0;
    s.last_block_hash = genesis_block.digest();
    return s;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

ValidationResult check_signature(const LedgerState& state, const Transaction& txn) {
    using VR = ValidationResult;
    if (txn.author.peer) return VR::reject("peer DIDs cannot author ledger transactions");

    crypto::PublicKey key;
    if (txn.kind == TxnKind::did_reg) {
        // Self-registration: key comes from the payload and must derive the DID.
        crypto::PublicKey pk;
        try {
            pk = crypto::PublicKey::from_hex_str(get_field<std::string>(txn.payload, "public_key"));
            Did claimed = Did::parse(get_field<std::string>(txn.payload, "did"));
            if (claimed != txn.author) return VR::reject("did-reg author/payload mismatch");
        } catch (const Error& e) {
            return VR::reject(std::string("malformed did-reg payload: ") + e.what());
        }
        if (identity::did_from_key(pk, false) != txn.author)
            return VR::reject("did does not derive from public key");
        key = pk;
    } else {
        auto it = state.did_documents.find(txn.author);
        if (it == state.did_documents.end()) return VR::reject("unknown author DID");
        if (it->second.revoked && txn.kind != TxnKind::did_revoke)
            return VR::reject("author DID revoked");
        key = it->second.active_public_key;
    }
    if (!crypto::verify(key, txn.signing_bytes(), txn.author_signature))
        return VR::reject("bad signature");
    return VR::accept();
}

ValidationResult check_permissions(const LedgerState& state, const Transaction& txn) {
    using VR = ValidationResult;
    const bool registrar = state.registrars.count(txn.author) != 0;
    switch (txn.kind) {
        case TxnKind::did_reg:
            return VR::accept();  // open
        case TxnKind::schema:
        case TxnKind::cred_def:
        case TxnKind::cred_reg:
        case TxnKind::cred_revoke:
        case TxnKind::did_revoke:
            return registrar ? VR::accept() : VR::reject("permission: registrar required");
        case TxnKind::rotate: {
            Did target;
            try {
                target = Did::parse(get_field<std::string>(txn.payload, "did"));
            } catch (const Error&) {
                return VR::reject("malformed rotate payload");
            }
            return target == txn.author ? VR::accept()
                                        : VR::reject("permission: rotate must be self-authored");
        }
    }
    return VR::reject("unknown kind");
}

ValidationResult check_payload(const LedgerState& state, const Transaction& txn) {
    using VR = ValidationResult;
    try {
        switch (txn.kind) {
            case TxnKind::did_reg: {
                Did did = Did::parse(get_field<std::string>(txn.payload, "did"));
                if (state.did_documents.count(did)) return VR::reject("did already registered");
                return VR::accept();
            }
            case TxnKind::schema: {
                auto schema = credentials::Schema::from_json(txn.payload.at("schema"));
                if (schema.attribute_names.empty()) return VR::reject("schema without attributes");
                std::set<std::string> names(schema.attribute_names.begin(),
                                            schema.attribute_names.end());
                if (names.size() != schema.attribute_names.size())
                    return VR::reject("duplicate attribute names");
                if (schema.issuer != txn.author) return VR::reject("schema issuer mismatch");
                auto doc = state.did_documents.find(txn.author);
                if (doc == state.did_documents.end()) return VR::reject("unknown schema issuer");
                if (!schema.signature_valid(doc->second.active_public_key))
                    return VR::reject("bad schema signature");
                if (state.schema_index.count({schema.name, schema.version}))
                    return VR::reject("duplicate schema name/version");
                return VR::accept();
            }
            case TxnKind::cred_def: {
                auto def = credentials::CredentialDefinition::from_json(txn.payload.at("cred_def"));
                if (!state.schemas.count(def.schema_ref)) return VR::reject("unknown schema digest");
                if (def.issuer != txn.author) return VR::reject("cred-def issuer mismatch");
                auto doc = state.did_documents.find(txn.author);
                if (doc == state.did_documents.end()) return VR::reject("unknown cred-def issuer");
                if (def.issuer_public_key != doc->second.active_public_key)
                    return VR::reject("cred-def key does not match issuer's active key");
                if (!def.signature_valid()) return VR::reject("bad cred-def signature");
                if (state.cred_defs.count(def.digest())) return VR::reject("duplicate cred-def");
                return VR::accept();
            }
            case TxnKind::cred_reg: {
                Digest def_ref =
                    Digest::from_hex_str(get_field<std::string>(txn.payload, "cred_def_ref"));
                if (!state.cred_defs.count(def_ref)) return VR::reject("unknown cred-def");
                Did subject = Did::parse(get_field<std::string>(txn.payload, "subject"));
                auto doc = state.did_documents.find(subject);
                if (doc == state.did_documents.end()) return VR::reject("unknown subject DID");
                if (doc->second.revoked) return VR::reject("subject DID revoked");
                Digest root =
                    Digest::from_hex_str(get_field<std::string>(txn.payload, "commitment_root"));
                if (state.cred_registry.count(root)) return VR::reject("duplicate credential");
                if (txn.payload.contains("vin_tag")) {
                    Digest tag = Digest::from_hex_str(get_field<std::string>(txn.payload, "vin_tag"));
                    if (state.vin_index.count(tag))
                        return VR::reject("duplicate VIN: live credential exists");
                }
                return VR::accept();
            }
            case TxnKind::cred_revoke: {
                Digest root =
                    Digest::from_hex_str(get_field<std::string>(txn.payload, "commitment_root"));
                auto it = state.cred_registry.find(root);
                if (it == state.cred_registry.end()) return VR::reject("unknown credential root");
                if (it->second.issuer != txn.author)
                    return VR::reject("revocation author is not the issuing registrar");
                if (it->second.revoked) return VR::reject("credential already revoked");
                return VR::accept();
            }
            case TxnKind::did_revoke: {
                Did target = Did::parse(get_field<std::string>(txn.payload, "did"));
                auto it = state.did_documents.find(target);
                if (it == state.did_documents.end()) return VR::reject("unknown DID");
                if (it->second.revoked) return VR::reject("DID already revoked");
                return VR::accept();
            }
            case TxnKind::rotate: {
                Did target = Did::parse(get_field<std::string>(txn.payload, "did"));
                auto it = state.did_documents.find(target);
                if (it == state.did_documents.end()) return VR::reject("unknown DID");
                if (it->second.revoked) return VR::reject("DID revoked");
                auto new_key =
                    crypto::PublicKey::from_hex_str(get_field<std::string>(txn.payload, "new_public_key"));
                if (new_key == it->second.active_public_key)
                    return VR::reject("new key equals active key");
                for (const auto& rk : it->second.previous_keys)
                    if (rk.public_key == new_key) return VR::reject("new key was retired before");
                return VR::accept();
            }
        }
    } catch (const Error& e) {
        return VR::reject(std::string("malformed payload: ") + e.what());
    }
    return VR::reject("unknown kind");
}

Digest nonce_key(const Did& author, const Nonce& nonce) {
    Bytes data = concat({as_bytes(author.str()), nonce.view()});
    return crypto::digest(data);
}

}  // namespace

ValidationResult validate_txn(const LedgerState& state, const Transaction& txn,
                              std::optional<std::int64_t> now_s) {
    if (auto r = check_signature(state, txn); !r.ok) return r;
    if (state.used_nonces.count(nonce_key(txn.author, txn.nonce)))
        return ValidationResult::reject("replay: (author, nonce) already committed");
    if (now_s && std::abs(*now_s - txn.timestamp) > kTimestampWindowS)
        return ValidationResult::reject("timestamp outside +/-300s window");
    if (auto r = check_permissions(state, txn); !r.ok) return r;
    return check_payload(state, txn);
}

// ---------------------------------------------------------------------------
// Apply

namespace {

void apply_valid_txn(LedgerState& s, const Transaction& txn) {
    switch (txn.kind) {
        case TxnKind::did_reg: {
            DidDocument doc;
            doc.id = txn.author;
            doc.active_public_key =
                crypto::PublicKey::from_hex_str(txn.payload.at("public_key").get<std::string>());
            doc.created_at = txn.timestamp;
            doc.updated_at = txn.timestamp;
            s.did_documents[doc.id] = std::move(doc);
            break;
        }
        case TxnKind::schema: {
            auto schema = credentials::Schema::from_json(txn.payload.at("schema"));
            Digest d = schema.digest();
            s.schema_index[{schema.name, schema.version}] = d;
            s.schemas[d] = std::move(schema);
            break;
        }
        case TxnKind::cred_def: {
            auto def = credentials::CredentialDefinition::from_json(txn.payload.at("cred_def"));
            s.cred_defs[def.digest()] = std::move(def);
            break;
        }
        case TxnKind::cred_reg: {
            CredentialEntry e;
            e.subject = Did::parse(txn.payload.at("subject").get<std::string>());
            e.issuer = txn.author;
            if (txn.payload.contains("vin_tag")) {
                e.vin_tag = Digest::from_hex_str(txn.payload.at("vin_tag").get<std::string>());
                s.vin_index.insert(e.vin_tag);
            }
            Digest root = Digest::from_hex_str(txn.payload.at("commitment_root").get<std::string>());
            s.cred_registry[root] = e;
            break;
        }
        case TxnKind::cred_revoke: {
            Digest root = Digest::from_hex_str(txn.payload.at("commitment_root").get<std::string>());
            auto& entry = s.cred_registry.at(root);
            entry.revoked = true;
            // Revocation frees the VIN for reissue (renewal).
            if (!entry.vin_tag.is_zero()) s.vin_index.erase(entry.vin_tag);
            break;
        }
        case TxnKind::did_revoke: {
            Did target = Did::parse(txn.payload.at("did").get<std::string>());
            auto& doc = s.did_documents.at(target);
            doc.revoked = true;
            doc.updated_at = txn.timestamp;
            break;
        }
        case TxnKind::rotate: {
            Did target = Did::parse(txn.payload.at("did").get<std::string>());
            auto& doc = s.did_documents.at(target);
            doc.previous_keys.push_back({doc.active_public_key, txn.timestamp});
            doc.active_public_key =
                crypto::PublicKey::from_hex_str(txn.payload.at("new_public_key").get<std::string>());
            doc.updated_at = txn.timestamp;
            break;
        }
    }
    s.used_nonces.insert(nonce_key(txn.author, txn.nonce));
}

}  // namespace

ValidationResult try_apply_txn(LedgerState& state, const Transaction& txn,
                               std::optional<std::int64_t> now_s) {
    auto v = validate_txn(state, txn, now_s);
    if (v.ok) apply_valid_txn(state, txn);
    return v;
}

ApplyResult apply_block(const LedgerState& state, const Block& block) {
    if (block.height != state.height + 1)
        throw LedgerError("block height " + std::to_string(block.height) +
                          " does not follow state height " + std::to_string(state.height));
    if (block.prev_hash != state.last_block_hash)
        throw LedgerError("broken chain linkage at height " + std::to_string(block.height));

    ApplyResult out{state, {}};
    for (const auto& txn : block.txns) {
        auto v = try_apply_txn(out.state, txn, std::nullopt);
        if (!v.ok) {
            out.rejected.push_back({txn.digest(), v.reason});
            out.state.rejected_in_blocks += 1;
        }
    }
    if (out.state.state_root() != block.state_root)
        throw LedgerError("state root mismatch at height " + std::to_string(block.height));
    out.state.height = block.height;
    out.state.last_block_hash = block.digest();
    return out;
}

// ---------------------------------------------------------------------------
// Snapshot

const DidDocument& Snapshot::resolve(const Did& did) const {
    if (did.peer) throw LedgerError("peer DIDs are not resolvable on the public ledger");
    auto it = state_->did_documents.find(did);
    if (it == state_->did_documents.end()) throw NotFoundError("DID not found: " + did.str());
    return it->second;
}

const credentials::Schema& Snapshot::schema(const Digest& d) const {
    auto it = state_->schemas.find(d);
    if (it == state_->schemas.end()) throw NotFoundError("schema not found: " + d.hex());
    return it->second;
}

std::optional<Digest> Snapshot::schema_by_name(const std::string& name,
                                               const std::string& version) const {
    auto it = state_->schema_index.find({name, version});
    if (it == state_->schema_index.end()) return std::nullopt;
    return it->second;
}

const credentials::CredentialDefinition& Snapshot::cred_def(const Digest& d) const {
    auto it = state_->cred_defs.find(d);
    if (it == state_->cred_defs.end()) throw NotFoundError("cred-def not found: " + d.hex());
    return it->second;
}

const CredentialEntry& Snapshot::credential(const Digest& root) const {
    auto it = state_->cred_registry.find(root);
    if (it == state_->cred_registry.end())
        throw NotFoundError("credential not found: " + root.hex());
    return it->second;
}

bool Snapshot::has_credential(const Digest& root) const {
    return state_->cred_registry.count(root) != 0;
}

// ---------------------------------------------------------------------------
// BlockStore

namespace {
constexpr char kBlockMagic[5] = {'V', 'D', 'K', 'B', 1};
}

BlockStore::BlockStore(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(path_)) {
        std::ofstream f(path_, std::ios::binary);
        if (!f) throw IoError("cannot create block store: " + path_.string());
        f.write(kBlockMagic, sizeof(kBlockMagic));
    }
}

std::vector<Block> BlockStore::read_all() const {
    std::ifstream f(path_, std::ios::binary);
    if (!f) throw IoError("cannot open block store: " + path_.string());
    char magic[5];
    f.read(magic, sizeof(magic));
    if (f.gcount() != sizeof(magic) || std::memcmp(magic, kBlockMagic, sizeof(magic)) != 0)
        throw IoError("bad block store header: " + path_.string());

    std::vector<Block> blocks;
    while (true) {
        std::uint8_t len_le[4];
        f.read(reinterpret_cast<char*>(len_le), 4);
        if (f.gcount() == 0) break;
        if (f.gcount() != 4) throw IoError("truncated block store");
        std::uint32_t len = 0;
        for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(len_le[i]) << (8 * i);
        std::string buf(len, '\0');
        f.read(buf.data(), len);
        if (static_cast<std::uint32_t>(f.gcount()) != len) throw IoError("truncated block store");
        Json j = Json::parse(buf, nullptr, false);
        if (j.is_discarded()) throw IoError("corrupt block in store");
        blocks.push_back(Block::from_json(j));
    }
    return blocks;
}

void BlockStore::append(const Block& block) {
    std::ofstream f(path_, std::ios::binary | std::ios::app);
    if (!f) throw IoError("cannot append to block store: " + path_.string());
    std::string data = canonical_string(block.to_json());
    std::uint32_t len = static_cast<std::uint32_t>(data.size());
    std::uint8_t len_le[4];
    for (int i = 0; i < 4; ++i) len_le[i] = static_cast<std::uint8_t>(len >> (8 * i));
    f.write(reinterpret_cast<const char*>(len_le), 4);
    f.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!f) throw IoError("failed writing block store");
}

}  // namespace vdkms::ledger
