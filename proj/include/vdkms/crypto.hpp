#pragma once

#include <optional>

#include "vdkms/bytes.hpp"
#include "vdkms/errors.hpp"
#include "vdkms/rng.hpp"

namespace vdkms::crypto {

// Ed25519 signing keys; X25519 (derived from the same keys) plus
// XChaCha20-Poly1305 for the pairwise sealed channel; BLAKE2b-256 digests.

using PublicKey = Fixed<32, struct PublicKeyTag>;
using Signature = Fixed<64, struct SignatureTag>;

inline constexpr std::size_t kSecretKeyBytes = 64;
inline constexpr std::size_t kSeedBytes = 32;

/// Signing secret key. Wiped on destruction.
struct SecretKey {
    std::array<std::uint8_t, kSecretKeyBytes> bytes{};

    SecretKey() = default;
    SecretKey(const SecretKey&) = default;
    SecretKey& operator=(const SecretKey&) = default;
    ~SecretKey();

    std::string hex() const { return to_hex({bytes.data(), bytes.size()}); }
    static SecretKey from_hex_str(std::string_view hex_text);
    bool operator==(const SecretKey& o) const { return bytes == o.bytes; }
};

struct KeyPair {
    PublicKey public_key;
    SecretKey secret_key;
};

/// Idempotent libsodium initialization; called by every entry point.
void init();

/// Fresh key pair from the given randomness source.
KeyPair keygen(Rng& rng);

/// Deterministic key pair; the same 32-byte seed yields the same pair.
KeyPair keygen_from_seed(ByteView seed);

/// Public key recomputed from the secret key.
PublicKey public_of(const SecretKey& sk);

Signature sign(const SecretKey& sk, ByteView msg);
bool verify(const PublicKey& pk, ByteView msg, const Signature& sig);

Digest digest(ByteView data);
/// Keyed digest (BLAKE2b with a 32-byte key); used for the VIN index tag.
Digest digest_keyed(ByteView key, ByteView data);

Nonce make_nonce(Rng& rng);
Salt make_salt(Rng& rng);

/// Authenticated encryption between two key pairs (X25519 agreement derived
/// from the Ed25519 keys, XChaCha20-Poly1305 over the payload with the given
/// associated data). Output is aead_nonce || ciphertext.
Bytes seal(const SecretKey& sender_sk, const PublicKey& recipient_pk,
           ByteView plaintext, ByteView aad, Rng& rng);

/// Inverse of seal. Throws AuthError on any tamper, wrong key, or wrong aad.
Bytes open(const SecretKey& recipient_sk, const PublicKey& sender_pk,
           ByteView sealed, ByteView aad);

}  // namespace vdkms::crypto
