#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vdkms/identity.hpp>
#include <vdkms/ledger.hpp>

#include <set>

#include "support/test_ledger.hpp"

using namespace vdkms;
using vdkms_test::RegistrarFixture;
using vdkms_test::TestLedger;

TEST_CASE("did derivation is deterministic and method-tagged") {
    crypto::PublicKey pk;
    pk.bytes.fill(0x11);
    auto a = identity::did_from_key(pk);
    auto b = identity::did_from_key(pk);
    CHECK(a == b);
    CHECK(a.str().rfind("did:vdkms:", 0) == 0);

    auto peer = identity::did_from_key(pk, true);
    CHECK(peer.str().rfind("did:vdkms:peer:", 0) == 0);
    CHECK(peer.id == a.id);
    CHECK(peer != a);
}

TEST_CASE("did parse/render round trip and malformed inputs") {
    SeededRng rng(1);
    for (int i = 0; i < 200; ++i) {
        crypto::PublicKey pk;
        rng.fill(pk.bytes);
        auto d = identity::did_from_key(pk, i % 2 == 0);
        CHECK(identity::Did::parse(d.str()) == d);
    }
    CHECK_THROWS_AS(identity::Did::parse("did:other:abc"), ParseError);
    CHECK_THROWS_AS(identity::Did::parse("did:vdkms:"), ParseError);
    CHECK_THROWS_AS(identity::Did::parse("did:vdkms:0OIl"), ParseError);  // bad alphabet
    CHECK_THROWS_AS(identity::Did::parse("did:vdkms:abc"), ParseError);   // wrong length
}

TEST_CASE("collision scan over 100k random keys") {
    SeededRng rng(2);
    std::set<std::string> seen;
    for (int i = 0; i < 100'000; ++i) {
        crypto::PublicKey pk;
        rng.fill(pk.bytes);
        REQUIRE(seen.insert(identity::did_from_key(pk).id).second);
    }
}

TEST_CASE("resolution after registration, peer rejection, unknown DID") {
    SeededRng rng(3);
    RegistrarFixture reg(rng);
    TestLedger tl(reg.genesis);

    auto vehicle = crypto::keygen(rng);
    auto did = identity::did_from_key(vehicle.public_key);
    auto rej = tl.commit({ledger::make_did_reg(vehicle, false, rng, tl.now_s)});
    CHECK(rej.empty());

    const auto& doc = identity::resolve(tl.snapshot(), did);
    CHECK(doc.active_public_key == vehicle.public_key);
    CHECK_FALSE(doc.revoked);

    identity::Did peer = did;
    peer.peer = true;
    CHECK_THROWS_AS(identity::resolve(tl.snapshot(), peer), LedgerError);

    auto other = crypto::keygen(rng);
    CHECK_THROWS_AS(identity::resolve(tl.snapshot(), identity::did_from_key(other.public_key)),
                    NotFoundError);
}

TEST_CASE("rotation chains keys in retirement order") {
    SeededRng rng(4);
    RegistrarFixture reg(rng);
    TestLedger tl(reg.genesis);

    auto kp = crypto::keygen(rng);
    auto did = identity::did_from_key(kp.public_key);
    tl.commit({ledger::make_did_reg(kp, false, rng, tl.now_s)});

    std::vector<crypto::PublicKey> history{kp.public_key};
    auto current = kp;
    for (int i = 0; i < 5; ++i) {
        tl.now_s += 10;
        auto next = crypto::keygen(rng);
        auto rej = tl.commit({identity::rotate_key(current, did, next.public_key, rng, tl.now_s)});
        REQUIRE(rej.empty());
        history.push_back(next.public_key);
        current.secret_key = next.secret_key;
        current.public_key = next.public_key;
    }

    const auto& doc = identity::resolve(tl.snapshot(), did);
    CHECK(doc.active_public_key == history.back());
    REQUIRE(doc.previous_keys.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(doc.previous_keys[static_cast<std::size_t>(i)].public_key ==
              history[static_cast<std::size_t>(i)]);
        if (i > 0)
            CHECK(doc.previous_keys[static_cast<std::size_t>(i)].retired_at >
                  doc.previous_keys[static_cast<std::size_t>(i - 1)].retired_at);
    }
    // active key does not appear among previous keys
    for (const auto& rk : doc.previous_keys) CHECK(rk.public_key != doc.active_public_key);
}

TEST_CASE("rotation signed by a non-active key is rejected") {
    SeededRng rng(5);
    RegistrarFixture reg(rng);
    TestLedger tl(reg.genesis);

    auto kp = crypto::keygen(rng);
    auto did = identity::did_from_key(kp.public_key);
    tl.commit({ledger::make_did_reg(kp, false, rng, tl.now_s)});

    auto next = crypto::keygen(rng);
    tl.commit({identity::rotate_key(kp, did, next.public_key, rng, tl.now_s)});

    // Old key tries to rotate again after retirement.
    auto another = crypto::keygen(rng);
    auto rej = tl.commit({identity::rotate_key(kp, did, another.public_key, rng, tl.now_s)});
    REQUIRE(rej.size() == 1);
    CHECK(rej[0].reason.find("signature") != std::string::npos);
}

TEST_CASE("key_at reports the key that was active at a given time") {
    SeededRng rng(6);
    RegistrarFixture reg(rng);
    TestLedger tl(reg.genesis);

    auto kp = crypto::keygen(rng);
    auto did = identity::did_from_key(kp.public_key);
    tl.now_s = 1000'000;
    tl.commit({ledger::make_did_reg(kp, false, rng, tl.now_s)});
    tl.now_s = 1000'100;
    auto next = crypto::keygen(rng);
    tl.commit({identity::rotate_key(kp, did, next.public_key, rng, tl.now_s)});

    const auto& doc = identity::resolve(tl.snapshot(), did);
    CHECK_FALSE(doc.key_at(999'999).has_value());
    CHECK(doc.key_at(1000'050).value() == kp.public_key);
    CHECK(doc.key_at(1000'100).value() == next.public_key);
    CHECK(doc.key_at(1000'200).value() == next.public_key);
}

TEST_CASE("revocation: registrar-only, blocks rotation, then resolves revoked") {
    SeededRng rng(7);
    RegistrarFixture reg(rng);
    TestLedger tl(reg.genesis);
    tl.commit({ledger::make_did_reg(reg.keys, false, rng, tl.now_s)});

    auto v1 = crypto::keygen(rng);
    auto v2 = crypto::keygen(rng);
    auto did1 = identity::did_from_key(v1.public_key);
    auto did2 = identity::did_from_key(v2.public_key);
    tl.commit({ledger::make_did_reg(v1, false, rng, tl.now_s),
               ledger::make_did_reg(v2, false, rng, tl.now_s)});

    // A vehicle cannot revoke another vehicle.
    auto rej = tl.commit({identity::revoke_did(v1, did1, did2, rng, tl.now_s)});
    REQUIRE(rej.size() == 1);
    CHECK(rej[0].reason.find("permission") != std::string::npos);

    // Registrar revokes; document flips and rotation is refused afterwards.
    rej = tl.commit({identity::revoke_did(reg.keys, reg.did, did1, rng, tl.now_s)});
    CHECK(rej.empty());
    CHECK(identity::resolve(tl.snapshot(), did1).revoked);

    auto next = crypto::keygen(rng);
    rej = tl.commit({identity::rotate_key(v1, did1, next.public_key, rng, tl.now_s)});
    REQUIRE(rej.size() == 1);
    CHECK(rej[0].reason.find("revoked") != std::string::npos);
}
