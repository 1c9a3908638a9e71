#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vdkms/crypto.hpp>
#include <vdkms/json.hpp>
#include <vdkms/wallet.hpp>

#include <algorithm>
#include <set>

using namespace vdkms;

TEST_CASE("keygen is deterministic from a seed") {
    std::array<std::uint8_t, 32> zero_seed{};
    auto a = crypto::keygen_from_seed(zero_seed);
    auto b = crypto::keygen_from_seed(zero_seed);
    CHECK(a.public_key == b.public_key);
    CHECK(a.secret_key == b.secret_key);

    std::array<std::uint8_t, 16> short_seed{};
    CHECK_THROWS_AS(crypto::keygen_from_seed(short_seed), ParseError);
}

TEST_CASE("unseeded keygen yields distinct keys") {
    SystemRng rng;
    auto a = crypto::keygen(rng);
    auto b = crypto::keygen(rng);
    CHECK(a.public_key != b.public_key);
}

TEST_CASE("1000 seeded pairs sign/verify round-trip") {
    SeededRng rng(7);
    const auto msg = as_bytes("m");
    for (int i = 0; i < 1000; ++i) {
        auto seed = rng.seed32();
        auto kp = crypto::keygen_from_seed(seed);
        CHECK(kp.public_key == crypto::public_of(kp.secret_key));
        auto sig = crypto::sign(kp.secret_key, msg);
        REQUIRE(crypto::verify(kp.public_key, msg, sig));
    }
}

TEST_CASE("bit-flip fuzz: flipped message or signature never verifies") {
    SeededRng rng(11);
    auto kp = crypto::keygen(rng);
    int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        Bytes msg(32);
        rng.fill(msg);
        auto sig = crypto::sign(kp.secret_key, msg);

        Bytes mutated = msg;
        std::size_t bit = rng.uniform(mutated.size() * 8);
        mutated[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        REQUIRE_FALSE(crypto::verify(kp.public_key, mutated, sig));

        auto bad_sig = sig;
        std::size_t sbit = rng.uniform(crypto::Signature::size() * 8);
        bad_sig.bytes[sbit / 8] ^= static_cast<std::uint8_t>(1u << (sbit % 8));
        REQUIRE_FALSE(crypto::verify(kp.public_key, msg, bad_sig));
    }
}

TEST_CASE("verification with a different key fails") {
    SeededRng rng(13);
    auto a = crypto::keygen(rng);
    auto b = crypto::keygen(rng);
    auto msg = as_bytes("payload");
    auto sig = crypto::sign(a.secret_key, msg);
    CHECK(crypto::verify(a.public_key, msg, sig));
    CHECK_FALSE(crypto::verify(b.public_key, msg, sig));
}

TEST_CASE("seal/open round trip and third-party exclusion") {
    SeededRng rng(17);
    auto sender = crypto::keygen(rng);
    auto recipient = crypto::keygen(rng);
    auto outsider = crypto::keygen(rng);
    auto aad = as_bytes("header");
    auto plain = as_bytes("confidential payload");

    Bytes sealed = crypto::seal(sender.secret_key, recipient.public_key, plain, aad, rng);
    Bytes opened = crypto::open(recipient.secret_key, sender.public_key, sealed, aad);
    CHECK(Bytes(plain.begin(), plain.end()) == opened);

    // An unrelated valid key pair cannot open it from either direction.
    CHECK_THROWS_AS(crypto::open(outsider.secret_key, sender.public_key, sealed, aad),
                    AuthError);
    CHECK_THROWS_AS(crypto::open(outsider.secret_key, recipient.public_key, sealed, aad),
                    AuthError);
    // Wrong associated data fails closed.
    CHECK_THROWS_AS(crypto::open(recipient.secret_key, sender.public_key, sealed,
                                 as_bytes("other header")),
                    AuthError);
}

TEST_CASE("tampered ciphertext always fails authentication") {
    SeededRng rng(19);
    auto sender = crypto::keygen(rng);
    auto recipient = crypto::keygen(rng);
    auto aad = as_bytes("aad");
    int trials = 10000;
    Bytes plain(24);
    rng.fill(plain);
    Bytes sealed = crypto::seal(sender.secret_key, recipient.public_key, plain, aad, rng);
    for (int i = 0; i < trials; ++i) {
        Bytes mutated = sealed;
        std::size_t pos = rng.uniform(mutated.size());
        std::uint8_t delta = static_cast<std::uint8_t>(1 + rng.uniform(255));
        mutated[pos] ^= delta;
        REQUIRE_THROWS_AS(
            crypto::open(recipient.secret_key, sender.public_key, mutated, aad), AuthError);
    }
}

TEST_CASE("equal plaintexts under distinct nonces give distinct ciphertexts") {
    SeededRng rng(23);
    auto sender = crypto::keygen(rng);
    auto recipient = crypto::keygen(rng);
    auto aad = as_bytes("a");
    auto plain = as_bytes("same message");
    Bytes c1 = crypto::seal(sender.secret_key, recipient.public_key, plain, aad, rng);
    Bytes c2 = crypto::seal(sender.secret_key, recipient.public_key, plain, aad, rng);
    CHECK(c1 != c2);
}

TEST_CASE("nonce draws do not collide at desk scale") {
    SeededRng rng(29);
    const int n = 1'000'000;
    std::vector<Nonce> nonces(n);
    for (auto& nn : nonces) nn = crypto::make_nonce(rng);
    std::sort(nonces.begin(), nonces.end());
    CHECK(std::adjacent_find(nonces.begin(), nonces.end()) == nonces.end());
}

TEST_CASE("digest is stable and input-sensitive") {
    auto d1 = crypto::digest(as_bytes("abc"));
    auto d2 = crypto::digest(as_bytes("abc"));
    auto d3 = crypto::digest(as_bytes("abd"));
    CHECK(d1 == d2);
    CHECK(d1 != d3);

    auto k1 = crypto::digest_keyed(d1.view(), as_bytes("x"));
    auto k2 = crypto::digest_keyed(d3.view(), as_bytes("x"));
    CHECK(k1 != k2);
}

TEST_CASE("canonical serialization is identical across seeded runs") {
    auto build = [](std::uint64_t seed) {
        SeededRng rng(seed);
        auto kp = crypto::keygen(rng);
        Json j{{"pk", kp.public_key.hex()},
               {"nonce", crypto::make_nonce(rng).hex()},
               {"n", 42}};
        return canonical_bytes(j);
    };
    CHECK(build(99) == build(99));
    CHECK(build(99) != build(100));
}

// ---------------------------------------------------------------------------
// Wallet

TEST_CASE("wallet store/load round trip") {
    SeededRng rng(31);
    Wallet w;
    w.put_keypair("keys", crypto::keygen(rng));
    w.put("note", Json{{"text", "hello"}});

    Bytes file = wallet_store(w, "correct horse", rng);
    Wallet loaded = wallet_load(file, "correct horse");
    CHECK(canonical_bytes(loaded.to_json()) == canonical_bytes(w.to_json()));

    CHECK_THROWS_AS(wallet_load(file, "correct horsex"), AuthError);
}

TEST_CASE("wallet with 100 records survives a round trip byte-exactly") {
    SeededRng rng(37);
    Wallet w;
    for (int i = 0; i < 100; ++i)
        w.put_keypair("record-" + std::to_string(i), crypto::keygen(rng));
    Bytes file = wallet_store(w, "pw", rng);
    Wallet loaded = wallet_load(file, "pw");
    CHECK(canonical_bytes(loaded.to_json()) == canonical_bytes(w.to_json()));
}

TEST_CASE("wallet rejects bad headers and empty passphrases") {
    SeededRng rng(41);
    Wallet w;
    CHECK_THROWS_AS(wallet_store(w, "", rng), WalletError);

    Bytes file = wallet_store(w, "pw", rng);
    Bytes bad_magic = file;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(wallet_load(bad_magic, "pw"), WalletError);

    Bytes bad_version = file;
    bad_version[4] = 9;
    CHECK_THROWS_AS(wallet_load(bad_version, "pw"), WalletError);
}
