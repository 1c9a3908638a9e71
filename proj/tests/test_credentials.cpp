#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vdkms/credentials.hpp>
#include <vdkms/ledger.hpp>
#include <vdkms/vin.hpp>

#include "support/test_ledger.hpp"
#include "support/vin_oracle.hpp"

using namespace vdkms;
using namespace vdkms::credentials;
using vdkms_test::RegistrarFixture;
using vdkms_test::TestLedger;

namespace {

struct Issued {
    SeededRng rng;
    RegistrarFixture reg;
    TestLedger tl;
    crypto::KeyPair vehicle;
    identity::Did vehicle_did;
    Schema schema;
    CredentialDefinition def;
    VerifiableCredential vc;
    ClaimSet claims;
    std::string vin;

    explicit Issued(std::uint64_t seed, bool issue = true)
        : rng(seed), reg(rng), tl(reg.genesis), vehicle(crypto::keygen(rng)),
          vehicle_did(identity::did_from_key(vehicle.public_key)) {
        tl.commit({ledger::make_did_reg(reg.keys, false, rng, tl.now_s),
                   ledger::make_did_reg(vehicle, false, rng, tl.now_s)});
        auto s = schema_gen(reg.keys, reg.did, "vehicle-reg", "1.0",
                            {"VIN", "make", "model", "owner"}, rng, tl.now_s);
        schema = s.schema;
        REQUIRE(tl.commit({s.txn}).empty());
        auto d = def_gen(reg.keys, reg.did, schema, rng, tl.now_s);
        def = d.definition;
        REQUIRE(tl.commit({d.txn}).empty());
        if (issue) {
            vin = random_vin(rng);
            auto issued = issue_credential(reg.keys, reg.did, def, schema, vehicle_did,
                                           vehicle.public_key,
                                           {{"VIN", vin},
                                            {"make", "Honda"},
                                            {"model", "Accord"},
                                            {"owner", "A. Driver"}},
                                           reg.genesis.vin_index_key.view(), rng, tl.now_s);
            vc = issued.credential;
            claims = issued.claims;
            REQUIRE(tl.commit({issued.txn}).empty());
        }
    }

    ProofRequest request(std::vector<std::string> attrs = {"VIN"}) {
        ProofRequest r;
        r.requested_attributes = std::move(attrs);
        r.nonce = crypto::make_nonce(rng);
        r.verifier = reg.did;  // any resolvable DID works as verifier id
        r.issued_at = tl.now_s;
        return r;
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// VIN validity (oracle first)

TEST_CASE("VIN check digit matches the independent oracle") {
    CHECK(vin_valid("1HGCM82633A004352"));  // known-good check digit '3'
    CHECK(vdkms_test::vin_oracle_valid("1HGCM82633A004352"));

    SeededRng rng(1);
    for (int i = 0; i < 1000; ++i) {
        std::string vin = random_vin(rng);
        CAPTURE(vin);
        REQUIRE(vin_valid(vin));
        REQUIRE(vdkms_test::vin_oracle_valid(vin));
        REQUIRE(vin[8] == vdkms_test::vin_oracle_check_digit(vin));
    }
}

TEST_CASE("every single-character VIN mutation is invalid") {
    SeededRng rng(2);
    const std::string alphabet = "0123456789ABCDEFGHJKLMNPRSTUVWXYZ";
    for (int trial = 0; trial < 50; ++trial) {
        std::string vin = random_vin(rng);
        for (std::size_t pos = 0; pos < vin.size(); ++pos) {
            for (char c : alphabet) {
                if (c == vin[pos]) continue;
                std::string mutated = vin;
                mutated[pos] = c;
                CAPTURE(mutated);
                REQUIRE_FALSE(vin_valid(mutated));
            }
        }
    }
}

TEST_CASE("VIN rejects bad length and forbidden letters") {
    CHECK_FALSE(vin_valid(""));
    CHECK_FALSE(vin_valid("1HGCM82633A00435"));    // 16 chars
    CHECK_FALSE(vin_valid("1HGCM82633A0043521")); // 18 chars
    CHECK_FALSE(vin_valid("IHGCM82633A004352"));   // I
    CHECK_FALSE(vin_valid("1HGCM82633A00435O"));   // O
    CHECK_FALSE(vin_valid("1HGCQ82633A004352"));   // Q
}

// ---------------------------------------------------------------------------
// Schema / definition

TEST_CASE("schema lifecycle: commit, query, duplicates rejected") {
    Issued f(10, /*issue=*/false);
    auto snap = f.tl.snapshot();
    auto d = snap.schema_by_name("vehicle-reg", "1.0");
    REQUIRE(d.has_value());
    CHECK(snap.schema(*d).attribute_names ==
          std::vector<std::string>{"VIN", "make", "model", "owner"});

    CHECK_THROWS_AS(schema_gen(f.reg.keys, f.reg.did, "s", "1", {}, f.rng, f.tl.now_s), Error);
    CHECK_THROWS_AS(
        schema_gen(f.reg.keys, f.reg.did, "s", "1", {"VIN", "VIN"}, f.rng, f.tl.now_s), Error);

    // Same (name, version) submitted again -> rejected as duplicate.
    auto again = schema_gen(f.reg.keys, f.reg.did, "vehicle-reg", "1.0", {"VIN", "color"},
                            f.rng, f.tl.now_s);
    auto rej = f.tl.commit({again.txn});
    REQUIRE(rej.size() == 1);
    CHECK(rej[0].reason.find("duplicate schema") != std::string::npos);
}

TEST_CASE("cred-def over an uncommitted schema digest is rejected") {
    Issued f(11, false);
    Schema phantom = f.schema;
    phantom.name = "never-committed";
    phantom.signature =
        crypto::sign(f.reg.keys.secret_key, canonical_bytes(phantom.body_json()));
    auto made = def_gen(f.reg.keys, f.reg.did, phantom, f.rng, f.tl.now_s);
    auto rej = f.tl.commit({made.txn});
    REQUIRE(rej.size() == 1);
    CHECK(rej[0].reason.find("unknown schema") != std::string::npos);
}

// ---------------------------------------------------------------------------
// Issuance

TEST_CASE("issuance guards: missing VIN, invalid VIN, duplicate VIN") {
    Issued f(12, false);
    std::map<std::string, std::string> attrs{
        {"make", "a"}, {"model", "b"}, {"owner", "c"}};
    CHECK_THROWS_WITH_AS(
        issue_credential(f.reg.keys, f.reg.did, f.def, f.schema, f.vehicle_did,
                         f.vehicle.public_key, attrs, f.reg.genesis.vin_index_key.view(),
                         f.rng, f.tl.now_s),
        "missing attribute: VIN", Error);

    attrs["VIN"] = "1HGCM82633A004353";  // wrong check digit
    CHECK_THROWS_AS(issue_credential(f.reg.keys, f.reg.did, f.def, f.schema, f.vehicle_did,
                                     f.vehicle.public_key, attrs,
                                     f.reg.genesis.vin_index_key.view(), f.rng, f.tl.now_s),
                    Error);

    attrs["VIN"] = "1HGCM82633A004352";
    auto first = issue_credential(f.reg.keys, f.reg.did, f.def, f.schema, f.vehicle_did,
                                  f.vehicle.public_key, attrs,
                                  f.reg.genesis.vin_index_key.view(), f.rng, f.tl.now_s);
    REQUIRE(f.tl.commit({first.txn}).empty());

    // Second issuance for the same VIN fails at the ledger.
    auto second = issue_credential(f.reg.keys, f.reg.did, f.def, f.schema, f.vehicle_did,
                                   f.vehicle.public_key, attrs,
                                   f.reg.genesis.vin_index_key.view(), f.rng, f.tl.now_s);
    auto rej = f.tl.commit({second.txn});
    REQUIRE(rej.size() == 1);
    CHECK(rej[0].reason.find("duplicate VIN") != std::string::npos);
}

TEST_CASE("raw attribute values never appear in committed payloads") {
    Issued f(13);
    for (const auto& block : f.tl.chain) {
        for (const auto& txn : block.txns) {
            std::string payload = canonical_string(txn.payload);
            CHECK(payload.find(f.vin) == std::string::npos);
            CHECK(payload.find("Honda") == std::string::npos);
            CHECK(payload.find("Accord") == std::string::npos);
            CHECK(payload.find("A. Driver") == std::string::npos);
        }
    }
}

// ---------------------------------------------------------------------------
// Presentations

TEST_CASE("selective disclosure reveals exactly the requested attributes") {
    Issued f(14);
    auto req = f.request({"VIN"});
    auto pres = proof_gen(f.vehicle, f.vc, f.claims, req);
    CHECK(pres.revealed.size() == 1);
    CHECK(pres.revealed.count("VIN") == 1);
    CHECK(pres.revealed.at("VIN").first == f.vin);
    CHECK(pres.hidden_commitments.size() == 3);
    CHECK(pres.hidden_commitments.count("make") == 1);

    CHECK_THROWS_AS(proof_gen(f.vehicle, f.vc, f.claims, f.request({"color"})), Error);
    CHECK_THROWS_AS(proof_gen(f.vehicle, f.vc, f.claims, f.request({})), Error);
}

TEST_CASE("powerset oracle: every subset of 4 attributes reveals exactly that subset") {
    Issued f(15);
    const std::vector<std::string> names{"VIN", "make", "model", "owner"};
    for (unsigned mask = 1; mask < 16; ++mask) {
        std::vector<std::string> want;
        for (unsigned b = 0; b < 4; ++b)
            if (mask & (1u << b)) want.push_back(names[b]);
        auto req = f.request(want);
        auto pres = proof_gen(f.vehicle, f.vc, f.claims, req);
        std::set<std::string> revealed;
        for (const auto& [k, v] : pres.revealed) revealed.insert(k);
        CHECK(revealed == std::set<std::string>(want.begin(), want.end()));
        CHECK(pres.revealed.size() + pres.hidden_commitments.size() == 4);
        CHECK(verify_presentation(f.tl.snapshot(), pres, req, f.tl.now_s).ok);
    }
}

TEST_CASE("honest verification succeeds; each conjunct failure is distinct") {
    Issued f(16);
    auto req = f.request();
    auto pres = proof_gen(f.vehicle, f.vc, f.claims, req);
    auto snap = f.tl.snapshot();

    CHECK(verify_presentation(snap, pres, req, f.tl.now_s).ok);

    SUBCASE("altered revealed value -> commitment mismatch") {
        auto p = pres;
        p.revealed["VIN"].first[0] = p.revealed["VIN"].first[0] == '1' ? '2' : '1';
        p.holder_signature = crypto::sign(f.vehicle.secret_key, p.signing_bytes());
        auto r = verify_presentation(snap, p, req, f.tl.now_s);
        CHECK_FALSE(r.ok);
        CHECK(r.reason == VerifyFail::commitment_mismatch);
    }
    SUBCASE("altered salt -> commitment mismatch") {
        auto p = pres;
        p.revealed["VIN"].second.bytes[0] ^= 1;
        p.holder_signature = crypto::sign(f.vehicle.secret_key, p.signing_bytes());
        auto r = verify_presentation(snap, p, req, f.tl.now_s);
        CHECK(r.reason == VerifyFail::commitment_mismatch);
    }
    SUBCASE("foreign subject -> holder signature fails") {
        auto p = pres;
        auto other = crypto::keygen(f.rng);
        f.tl.commit({ledger::make_did_reg(other, false, f.rng, f.tl.now_s)});
        p.core.subject = identity::did_from_key(other.public_key);
        auto r = verify_presentation(f.tl.snapshot(), p, req, f.tl.now_s);
        CHECK_FALSE(r.ok);
        CHECK(r.reason == VerifyFail::bad_holder_signature);
    }
    SUBCASE("unknown issuer -> issuer not found") {
        auto p = pres;
        auto ghost = crypto::keygen(f.rng);
        p.core.issuer = identity::did_from_key(ghost.public_key);
        p.holder_signature = crypto::sign(f.vehicle.secret_key, p.signing_bytes());
        auto r = verify_presentation(snap, p, req, f.tl.now_s);
        CHECK(r.reason == VerifyFail::issuer_not_found);
    }
    SUBCASE("non-registrar issuer -> untrusted") {
        auto p = pres;
        auto rogue = crypto::keygen(f.rng);
        auto rogue_did = identity::did_from_key(rogue.public_key);
        f.tl.commit({ledger::make_did_reg(rogue, false, f.rng, f.tl.now_s)});
        p.core.issuer = rogue_did;
        p.holder_signature = crypto::sign(f.vehicle.secret_key, p.signing_bytes());
        auto r = verify_presentation(f.tl.snapshot(), p, req, f.tl.now_s);
        CHECK_FALSE(r.ok);
        CHECK(r.reason == VerifyFail::untrusted_issuer);
    }
    SUBCASE("nonce mismatch") {
        auto other_req = f.request();
        auto r = verify_presentation(snap, pres, other_req, f.tl.now_s);
        CHECK(r.reason == VerifyFail::nonce_mismatch);
    }
    SUBCASE("stale request") {
        auto r = verify_presentation(snap, pres, req, f.tl.now_s + 301);
        CHECK(r.reason == VerifyFail::stale_request);
    }
    SUBCASE("tampered issuer signature") {
        auto p = pres;
        p.core.issuer_signature.bytes[0] ^= 1;
        p.holder_signature = crypto::sign(f.vehicle.secret_key, p.signing_bytes());
        auto r = verify_presentation(snap, p, req, f.tl.now_s);
        CHECK(r.reason == VerifyFail::bad_issuer_signature);
    }
    SUBCASE("tampered holder signature") {
        auto p = pres;
        p.holder_signature.bytes[0] ^= 1;
        auto r = verify_presentation(snap, p, req, f.tl.now_s);
        CHECK(r.reason == VerifyFail::bad_holder_signature);
    }
    SUBCASE("hidden attribute dropped -> coverage failure") {
        auto p = pres;
        p.hidden_commitments.erase("make");
        p.holder_signature = crypto::sign(f.vehicle.secret_key, p.signing_bytes());
        auto r = verify_presentation(snap, p, req, f.tl.now_s);
        CHECK(r.reason == VerifyFail::attribute_coverage);
    }
    SUBCASE("requested attribute not revealed") {
        auto wide_req = f.request({"VIN", "make"});
        auto p = proof_gen(f.vehicle, f.vc, f.claims, wide_req);
        p.revealed.erase("make");
        p.hidden_commitments["make"] = f.vc.commitments.at("make");
        p.holder_signature = crypto::sign(f.vehicle.secret_key, p.signing_bytes());
        auto r = verify_presentation(snap, p, wide_req, f.tl.now_s);
        CHECK(r.reason == VerifyFail::missing_requested_attribute);
    }
}

TEST_CASE("binding: presentation from request A fails under request B (10x10)") {
    Issued f(17);
    std::vector<ProofRequest> reqs;
    std::vector<Presentation> press;
    for (int i = 0; i < 10; ++i) {
        reqs.push_back(f.request());
        press.push_back(proof_gen(f.vehicle, f.vc, f.claims, reqs.back()));
    }
    auto snap = f.tl.snapshot();
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            auto r = verify_presentation(snap, press[static_cast<std::size_t>(i)],
                                         reqs[static_cast<std::size_t>(j)], f.tl.now_s);
            if (i == j)
                CHECK(r.ok);
            else
                CHECK(r.reason == VerifyFail::nonce_mismatch);
        }
}

TEST_CASE("mutation fuzz: random single-field mutations never verify") {
    Issued f(18);
    SeededRng fuzz(777);
    int trials = 1000;
    int rejected = 0;
    for (int i = 0; i < trials; ++i) {
        auto req = f.request();
        auto pres = proof_gen(f.vehicle, f.vc, f.claims, req);
        switch (fuzz.uniform(7)) {
            case 0: pres.revealed["VIN"].first += "x"; break;
            case 1: pres.revealed["VIN"].second.bytes[fuzz.uniform(16)] ^= 0x40; break;
            case 2: pres.core.issued_at += 1; break;
            case 3: pres.core.commitment_root.bytes[fuzz.uniform(32)] ^= 0x01; break;
            case 4: pres.challenge_nonce.bytes[fuzz.uniform(16)] ^= 0x10; break;
            case 5: pres.core.issuer_signature.bytes[fuzz.uniform(64)] ^= 0x08; break;
            default: pres.holder_signature.bytes[fuzz.uniform(64)] ^= 0x02; break;
        }
        if (!verify_presentation(f.tl.snapshot(), pres, req, f.tl.now_s).ok) ++rejected;
    }
    CHECK(rejected == trials);
}

// ---------------------------------------------------------------------------
// Revocation

TEST_CASE("credential revocation and snapshot semantics") {
    Issued f(19);
    auto req = f.request();
    auto pres = proof_gen(f.vehicle, f.vc, f.claims, req);
    auto before = f.tl.snapshot();
    CHECK(verify_presentation(before, pres, req, f.tl.now_s).ok);

    REQUIRE(f.tl.commit({revoke_credential(f.reg.keys, f.reg.did, f.vc.root(), f.rng,
                                           f.tl.now_s)})
                .empty());
    auto after = f.tl.snapshot();
    auto r = verify_presentation(after, pres, req, f.tl.now_s);
    CHECK(r.reason == VerifyFail::revoked_credential);

    // A snapshot taken before the revocation still verifies.
    CHECK(verify_presentation(before, pres, req, f.tl.now_s).ok);
}

TEST_CASE("revocation by a different registrar is rejected") {
    SeededRng rng(20);
    RegistrarFixture reg_a(rng);
    // Two registrars in genesis.
    auto keys_b = crypto::keygen(rng);
    auto did_b = identity::did_from_key(keys_b.public_key);
    reg_a.genesis.registrars.emplace_back(did_b, keys_b.public_key);
    TestLedger tl(reg_a.genesis);

    auto vehicle = crypto::keygen(rng);
    auto vehicle_did = identity::did_from_key(vehicle.public_key);
    tl.commit({ledger::make_did_reg(reg_a.keys, false, rng, tl.now_s),
               ledger::make_did_reg(keys_b, false, rng, tl.now_s),
               ledger::make_did_reg(vehicle, false, rng, tl.now_s)});
    auto s = schema_gen(reg_a.keys, reg_a.did, "vr", "1", {"VIN"}, rng, tl.now_s);
    tl.commit({s.txn});
    auto d = def_gen(reg_a.keys, reg_a.did, s.schema, rng, tl.now_s);
    tl.commit({d.txn});
    auto issued = issue_credential(reg_a.keys, reg_a.did, d.definition, s.schema, vehicle_did,
                                   vehicle.public_key, {{"VIN", random_vin(rng)}},
                                   reg_a.genesis.vin_index_key.view(), rng, tl.now_s);
    REQUIRE(tl.commit({issued.txn}).empty());

    auto rej = tl.commit(
        {revoke_credential(keys_b, did_b, issued.credential.root(), rng, tl.now_s)});
    REQUIRE(rej.size() == 1);
    CHECK(rej[0].reason.find("not the issuing registrar") != std::string::npos);

    // Unknown root likewise rejected.
    Digest ghost;
    ghost.bytes.fill(0xab);
    rej = tl.commit({revoke_credential(reg_a.keys, reg_a.did, ghost, rng, tl.now_s)});
    REQUIRE(rej.size() == 1);
    CHECK(rej[0].reason.find("unknown credential") != std::string::npos);
}

TEST_CASE("revoked subject and revoked issuer are distinct failures") {
    Issued f(21);
    auto req = f.request();
    auto pres = proof_gen(f.vehicle, f.vc, f.claims, req);

    SUBCASE("subject revoked") {
        f.tl.commit({identity::revoke_did(f.reg.keys, f.reg.did, f.vehicle_did, f.rng,
                                          f.tl.now_s)});
        auto r = verify_presentation(f.tl.snapshot(), pres, req, f.tl.now_s);
        CHECK(r.reason == VerifyFail::revoked_subject);
    }
    SUBCASE("issuer revoked") {
        f.tl.commit(
            {identity::revoke_did(f.reg.keys, f.reg.did, f.reg.did, f.rng, f.tl.now_s)});
        auto r = verify_presentation(f.tl.snapshot(), pres, req, f.tl.now_s);
        CHECK(r.reason == VerifyFail::revoked_issuer);
    }
}

TEST_CASE("rotation safety for presentations") {
    Issued f(22);
    auto pre_rotation_snap = f.tl.snapshot();
    auto req = f.request();
    auto old_key_pres = proof_gen(f.vehicle, f.vc, f.claims, req);

    // Subject rotates; the retired key must not verify against the new state.
    auto fresh = crypto::keygen(f.rng);
    f.tl.now_s += 10;
    REQUIRE(f.tl.commit({identity::rotate_key(f.vehicle, f.vehicle_did, fresh.public_key,
                                              f.rng, f.tl.now_s)})
                .empty());

    auto post = f.tl.snapshot();
    auto r = verify_presentation(post, old_key_pres, req, f.tl.now_s);
    CHECK(r.reason == VerifyFail::bad_holder_signature);

    // Signed before retirement, checked against the pre-rotation snapshot: valid.
    CHECK(verify_presentation(pre_rotation_snap, old_key_pres, req, f.tl.now_s).ok);

    // New active key presents successfully; issuer key lookup at issuance
    // time still matches even though the credential predates the rotation.
    crypto::KeyPair rotated{fresh.public_key, fresh.secret_key};
    auto req2 = f.request();
    auto new_pres = proof_gen(rotated, f.vc, f.claims, req2);
    CHECK(verify_presentation(post, new_pres, req2, f.tl.now_s).ok);
}

TEST_CASE("issuer key rotation: old credentials still verify via key_at") {
    Issued f(23);
    // Registrar rotates its key after issuing.
    auto fresh = crypto::keygen(f.rng);
    f.tl.now_s += 50;
    REQUIRE(f.tl.commit({identity::rotate_key(f.reg.keys, f.reg.did, fresh.public_key, f.rng,
                                              f.tl.now_s)})
                .empty());
    auto req = f.request();
    auto pres = proof_gen(f.vehicle, f.vc, f.claims, req);
    CHECK(verify_presentation(f.tl.snapshot(), pres, req, f.tl.now_s).ok);
}
