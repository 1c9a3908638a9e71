#include "vdkms/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>

namespace vdkms::crypto {

static_assert(PublicKey::size() == crypto_sign_PUBLICKEYBYTES);
static_assert(kSecretKeyBytes == crypto_sign_SECRETKEYBYTES);
static_assert(Signature::size() == crypto_sign_BYTES);
static_assert(kSeedBytes == crypto_sign_SEEDBYTES);

SecretKey::~SecretKey() { sodium_memzero(bytes.data(), bytes.size()); }

SecretKey SecretKey::from_hex_str(std::string_view hex_text) {
    Bytes raw = from_hex(hex_text);
    if (raw.size() != kSecretKeyBytes) throw_size_mismatch(kSecretKeyBytes, raw.size());
    SecretKey sk;
    std::memcpy(sk.bytes.data(), raw.data(), raw.size());
    sodium_memzero(raw.data(), raw.size());
    return sk;
}

void init() {
    static std::once_flag flag;
    std::call_once(flag, [] {
        if (sodium_init() < 0) throw CryptoError("libsodium initialization failed");
    });
}

KeyPair keygen(Rng& rng) {
    std::array<std::uint8_t, kSeedBytes> seed;
    rng.fill(seed);
    KeyPair kp = keygen_from_seed({seed.data(), seed.size()});
    sodium_memzero(seed.data(), seed.size());
    return kp;
}

KeyPair keygen_from_seed(ByteView seed) {
    init();
    if (seed.size() != kSeedBytes) throw_size_mismatch(kSeedBytes, seed.size());
    KeyPair kp;
    crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.bytes.data(), seed.data());
    return kp;
}

PublicKey public_of(const SecretKey& sk) {
    init();
    PublicKey pk;
    crypto_sign_ed25519_sk_to_pk(pk.data(), sk.bytes.data());
    return pk;
}

Signature sign(const SecretKey& sk, ByteView msg) {
    init();
    Signature sig;
    if (crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), sk.bytes.data()) != 0)
        throw CryptoError("sign failed");
    return sig;
}

bool verify(const PublicKey& pk, ByteView msg, const Signature& sig) {
    init();
    return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), pk.data()) == 0;
}

Digest digest(ByteView data) {
    init();
    Digest d;
    crypto_generichash(d.data(), Digest::size(), data.data(), data.size(), nullptr, 0);
    return d;
}

Digest digest_keyed(ByteView key, ByteView data) {
    init();
    Digest d;
    crypto_generichash(d.data(), Digest::size(), data.data(), data.size(), key.data(),
                       key.size());
    return d;
}

Nonce make_nonce(Rng& rng) {
    Nonce n;
    rng.fill(n.bytes);
    return n;
}

Salt make_salt(Rng& rng) {
    Salt s;
    rng.fill(s.bytes);
    return s;
}

namespace {

// X25519 shared key for a sender/recipient pair, derived from their Ed25519
// keys. Hashed together with both curve points, lower point first, so both
// directions derive the same channel key.
std::array<std::uint8_t, 32> pair_key(const SecretKey& my_sk, const PublicKey& their_pk) {
    std::array<std::uint8_t, crypto_scalarmult_curve25519_BYTES> my_x_sk;
    std::array<std::uint8_t, crypto_scalarmult_curve25519_BYTES> my_x_pk;
    std::array<std::uint8_t, crypto_scalarmult_curve25519_BYTES> their_x_pk;

    if (crypto_sign_ed25519_sk_to_curve25519(my_x_sk.data(), my_sk.bytes.data()) != 0)
        throw CryptoError("secret key conversion failed");
    if (crypto_sign_ed25519_pk_to_curve25519(their_x_pk.data(), their_pk.data()) != 0)
        throw CryptoError("public key conversion failed");
    if (crypto_scalarmult_curve25519_base(my_x_pk.data(), my_x_sk.data()) != 0)
        throw CryptoError("scalar mult failed");

    std::array<std::uint8_t, crypto_scalarmult_curve25519_BYTES> shared;
    if (crypto_scalarmult_curve25519(shared.data(), my_x_sk.data(), their_x_pk.data()) != 0)
        throw CryptoError("key agreement failed");

    const auto* lo = my_x_pk.data();
    const auto* hi = their_x_pk.data();
    if (std::memcmp(lo, hi, my_x_pk.size()) > 0) std::swap(lo, hi);

    std::array<std::uint8_t, 32> key;
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, key.size());
    crypto_generichash_update(&st, shared.data(), shared.size());
    crypto_generichash_update(&st, lo, crypto_scalarmult_curve25519_BYTES);
    crypto_generichash_update(&st, hi, crypto_scalarmult_curve25519_BYTES);
    crypto_generichash_final(&st, key.data(), key.size());

    sodium_memzero(my_x_sk.data(), my_x_sk.size());
    sodium_memzero(shared.data(), shared.size());
    return key;
}

constexpr std::size_t kAeadNonceBytes = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;

}  // namespace

Bytes seal(const SecretKey& sender_sk, const PublicKey& recipient_pk, ByteView plaintext,
           ByteView aad, Rng& rng) {
    init();
    auto key = pair_key(sender_sk, recipient_pk);

    Bytes out(kAeadNonceBytes + plaintext.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
    rng.fill({out.data(), kAeadNonceBytes});

    unsigned long long clen = 0;
    crypto_aead_xchacha20poly1305_ietf_encrypt(
        out.data() + kAeadNonceBytes, &clen, plaintext.data(), plaintext.size(), aad.data(),
        aad.size(), nullptr, out.data(), key.data());
    out.resize(kAeadNonceBytes + clen);
    sodium_memzero(key.data(), key.size());
    return out;
}

Bytes open(const SecretKey& recipient_sk, const PublicKey& sender_pk, ByteView sealed,
           ByteView aad) {
    init();
    if (sealed.size() < kAeadNonceBytes + crypto_aead_xchacha20poly1305_ietf_ABYTES)
        throw AuthError("sealed payload too short");

    auto key = pair_key(recipient_sk, sender_pk);

    Bytes out(sealed.size() - kAeadNonceBytes - crypto_aead_xchacha20poly1305_ietf_ABYTES);
    unsigned long long mlen = 0;
    int rc = crypto_aead_xchacha20poly1305_ietf_decrypt(
        out.data(), &mlen, nullptr, sealed.data() + kAeadNonceBytes,
        sealed.size() - kAeadNonceBytes, aad.data(), aad.size(), sealed.data(), key.data());
    sodium_memzero(key.data(), key.size());
    if (rc != 0) throw AuthError("authentication failed");
    out.resize(mlen);
    return out;
}

}  // namespace vdkms::crypto
