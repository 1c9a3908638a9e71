#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vdkms/credentials.hpp>
#include <vdkms/ledger.hpp>
#include <vdkms/vin.hpp>

#include <filesystem>

#include "support/test_ledger.hpp"

using namespace vdkms;
using vdkms_test::RegistrarFixture;
using vdkms_test::TestLedger;

namespace {

struct Fixture {
    SeededRng rng;
    RegistrarFixture reg;
    TestLedger tl;
    crypto::KeyPair vehicle;
    identity::Did vehicle_did;

    explicit Fixture(std::uint64_t seed)
        : rng(seed), reg(rng), tl(reg.genesis), vehicle(crypto::keygen(rng)),
          vehicle_did(identity::did_from_key(vehicle.public_key)) {
        tl.commit({ledger::make_did_reg(reg.keys, false, rng, tl.now_s),
                   ledger::make_did_reg(vehicle, false, rng, tl.now_s)});
    }

    credentials::SchemaWithTxn make_schema(const std::string& name = "vehicle-reg") {
        return credentials::schema_gen(reg.keys, reg.did, name, "1.0",
                                       {"VIN", "make", "model", "owner"}, rng, tl.now_s);
    }
};

}  // namespace

TEST_CASE("permission matrix: role x kind") {
    Fixture f(100);
    auto schema = f.make_schema();

    // Vehicle submits SCHEMA -> permission reject.
    auto bad_schema = credentials::schema_gen(f.vehicle, f.vehicle_did, "s", "1",
                                              {"VIN"}, f.rng, f.tl.now_s);
    auto r = ledger::validate_txn(f.tl.state, bad_schema.txn, f.tl.now_s);
    CHECK_FALSE(r.ok);
    CHECK(r.reason.find("permission") != std::string::npos);

    // Registrar SCHEMA ok.
    r = ledger::validate_txn(f.tl.state, schema.txn, f.tl.now_s);
    CHECK(r.ok);

    // DID_REG is open to anyone.
    auto fresh = crypto::keygen(f.rng);
    r = ledger::validate_txn(f.tl.state, ledger::make_did_reg(fresh, false, f.rng, f.tl.now_s),
                             f.tl.now_s);
    CHECK(r.ok);

    // ROTATE must be self-authored.
    auto other = crypto::keygen(f.rng);
    auto rotate_other = ledger::make_txn(
        ledger::TxnKind::rotate,
        Json{{"did", f.vehicle_did.str()}, {"new_public_key", other.public_key.hex()}},
        f.reg.did, f.reg.keys.secret_key, f.rng, f.tl.now_s);
    r = ledger::validate_txn(f.tl.state, rotate_other, f.tl.now_s);
    CHECK_FALSE(r.ok);
    CHECK(r.reason.find("permission") != std::string::npos);

    // Registrar-only kinds, authored by the vehicle, all reject.
    for (auto kind : {ledger::TxnKind::cred_revoke, ledger::TxnKind::did_revoke}) {
        auto txn = ledger::make_txn(kind, Json{{"commitment_root", Digest{}.hex()},
                                               {"did", f.vehicle_did.str()}},
                                    f.vehicle_did, f.vehicle.secret_key, f.rng, f.tl.now_s);
        r = ledger::validate_txn(f.tl.state, txn, f.tl.now_s);
        CHECK_FALSE(r.ok);
        CHECK(r.reason.find("permission") != std::string::npos);
    }
}

TEST_CASE("replayed (author, nonce) is rejected") {
    Fixture f(101);
    auto schema = f.make_schema();
    CHECK(f.tl.commit({schema.txn}).empty());
    auto rej = f.tl.commit({schema.txn});
    REQUIRE(rej.size() == 1);
    CHECK(rej[0].reason.find("replay") != std::string::npos);
}

TEST_CASE("timestamp window is enforced at admission only") {
    Fixture f(102);
    auto fresh = crypto::keygen(f.rng);
    auto txn = ledger::make_did_reg(fresh, false, f.rng, f.tl.now_s - 301);
    auto r = ledger::validate_txn(f.tl.state, txn, f.tl.now_s);
    CHECK_FALSE(r.ok);
    CHECK(r.reason.find("timestamp") != std::string::npos);

    r = ledger::validate_txn(f.tl.state, txn, f.tl.now_s - 301 + 100);
    CHECK(r.ok);

    // Future skew beyond the window also rejected.
    auto txn2 = ledger::make_did_reg(crypto::keygen(f.rng), false, f.rng, f.tl.now_s + 301);
    r = ledger::validate_txn(f.tl.state, txn2, f.tl.now_s);
    CHECK_FALSE(r.ok);

    // Deterministic replay path ignores freshness.
    r = ledger::validate_txn(f.tl.state, txn, std::nullopt);
    CHECK(r.ok);
}

TEST_CASE("tampered signature is rejected") {
    Fixture f(103);
    auto fresh = crypto::keygen(f.rng);
    auto txn = ledger::make_did_reg(fresh, false, f.rng, f.tl.now_s);
    txn.author_signature.bytes[0] ^= 1;
    auto r = ledger::validate_txn(f.tl.state, txn, f.tl.now_s);
    CHECK_FALSE(r.ok);
    CHECK(r.reason.find("signature") != std::string::npos);
}

TEST_CASE("apply of an empty block changes nothing but the height") {
    Fixture f(104);
    Digest root_before = f.tl.state.state_root();
    std::uint64_t height_before = f.tl.state.height;
    f.tl.commit({});
    CHECK(f.tl.state.state_root() == root_before);
    CHECK(f.tl.state.height == height_before + 1);
}

TEST_CASE("dual replay: identical block sequences reproduce the state root") {
    Fixture f(105);
    auto schema = f.make_schema();
    f.tl.commit({schema.txn});
    auto def = credentials::def_gen(f.reg.keys, f.reg.did, schema.schema, f.rng, f.tl.now_s);
    f.tl.commit({def.txn});

    // Replica B replays the recorded chain from genesis.
    ledger::LedgerState replica = ledger::genesis_state(f.tl.genesis_block);
    for (std::size_t i = 1; i < f.tl.chain.size(); ++i)
        replica = ledger::apply_block(replica, f.tl.chain[i]).state;

    CHECK(replica.state_root() == f.tl.state.state_root());
    CHECK(replica.last_block_hash == f.tl.state.last_block_hash);

    // 100 random queries answer identically on both snapshots.
    ledger::Snapshot a(f.tl.state);
    ledger::Snapshot b(replica);
    SeededRng qrng(9);
    for (int i = 0; i < 100; ++i) {
        crypto::PublicKey pk;
        qrng.fill(pk.bytes);
        auto did = identity::did_from_key(pk);
        bool found_a = true, found_b = true;
        try {
            a.resolve(did);
        } catch (const NotFoundError&) {
            found_a = false;
        }
        try {
            b.resolve(did);
        } catch (const NotFoundError&) {
            found_b = false;
        }
        CHECK(found_a == found_b);
    }
    CHECK(a.schema_by_name("vehicle-reg", "1.0") == b.schema_by_name("vehicle-reg", "1.0"));
}

TEST_CASE("duplicate-VIN registrations: first applies, second is recorded rejected") {
    Fixture f(106);
    auto schema = f.make_schema();
    f.tl.commit({schema.txn});
    auto def = credentials::def_gen(f.reg.keys, f.reg.did, schema.schema, f.rng, f.tl.now_s);
    f.tl.commit({def.txn});

    std::string vin = random_vin(f.rng);
    std::map<std::string, std::string> attrs{
        {"VIN", vin}, {"make", "a"}, {"model", "b"}, {"owner", "c"}};

    auto second_subject = crypto::keygen(f.rng);
    f.tl.commit({ledger::make_did_reg(second_subject, false, f.rng, f.tl.now_s)});

    auto issue1 = credentials::issue_credential(
        f.reg.keys, f.reg.did, def.definition, schema.schema, f.vehicle_did,
        f.vehicle.public_key, attrs, f.reg.genesis.vin_index_key.view(), f.rng, f.tl.now_s);
    auto issue2 = credentials::issue_credential(
        f.reg.keys, f.reg.did, def.definition, schema.schema,
        identity::did_from_key(second_subject.public_key), second_subject.public_key, attrs,
        f.reg.genesis.vin_index_key.view(), f.rng, f.tl.now_s);

    auto rej = f.tl.commit({issue1.txn, issue2.txn});
    REQUIRE(rej.size() == 1);
    CHECK(rej[0].txn == issue2.txn.digest());
    CHECK(rej[0].reason.find("duplicate VIN") != std::string::npos);
}

TEST_CASE("hash chain: altering any historical transaction changes descendants") {
    Fixture f(107);
    auto schema = f.make_schema();
    f.tl.commit({schema.txn});
    f.tl.commit({});
    f.tl.commit({});

    auto original = f.tl.chain;
    // Flip one byte inside the recorded schema transaction.
    auto& tampered_block = f.tl.chain[2];
    tampered_block.txns[0].timestamp += 1;
    CHECK(tampered_block.digest() != original[2].digest());

    // Every later prev_hash now mismatches.
    CHECK(original[3].prev_hash != tampered_block.digest());

    // Replaying the tampered chain fails at the altered block: the txn's
    // signature no longer verifies, so deterministic execution diverges from
    // the recorded state root.
    ledger::LedgerState replica = ledger::genesis_state(f.tl.genesis_block);
    replica = ledger::apply_block(replica, f.tl.chain[1]).state;
    CHECK_THROWS_AS(ledger::apply_block(replica, f.tl.chain[2]), LedgerError);
}

TEST_CASE("snapshot queries: committed vs not-yet-committed") {
    Fixture f(108);
    auto schema = f.make_schema();
    auto before = f.tl.snapshot();
    f.tl.commit({schema.txn});
    auto after = f.tl.snapshot();

    Digest d = schema.schema.digest();
    CHECK_THROWS_AS(before.schema(d), NotFoundError);
    CHECK(after.schema(d).name == "vehicle-reg");
    CHECK(before.height() + 1 == after.height());
}

TEST_CASE("block store round trip and replay") {
    Fixture f(109);
    auto schema = f.make_schema();
    f.tl.commit({schema.txn});

    auto path = std::filesystem::temp_directory_path() / "vdkms_test_blocks.dat";
    std::filesystem::remove(path);
    ledger::BlockStore store(path);
    for (const auto& b : f.tl.chain) store.append(b);

    ledger::BlockStore reopened(path);
    auto blocks = reopened.read_all();
    REQUIRE(blocks.size() == f.tl.chain.size());
    for (std::size_t i = 0; i < blocks.size(); ++i)
        CHECK(blocks[i].digest() == f.tl.chain[i].digest());

    ledger::LedgerState replayed = ledger::genesis_state(blocks[0]);
    for (std::size_t i = 1; i < blocks.size(); ++i)
        replayed = ledger::apply_block(replayed, blocks[i]).state;
    CHECK(replayed.state_root() == f.tl.state.state_root());
    std::filesystem::remove(path);
}

TEST_CASE("ledger state JSON round trip preserves the root") {
    Fixture f(110);
    auto schema = f.make_schema();
    f.tl.commit({schema.txn});
    auto j = f.tl.state.to_json();
    auto back = ledger::LedgerState::from_json(j);
    CHECK(back.state_root() == f.tl.state.state_root());
    CHECK(back.height == f.tl.state.height);
    CHECK(back.last_block_hash == f.tl.state.last_block_hash);
}
