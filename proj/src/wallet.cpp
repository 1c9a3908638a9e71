#include "vdkms/wallet.hpp"

#include <sodium.h>

#include <cstring>
#include <fstream>

namespace vdkms {

namespace {

constexpr char kMagic[4] = {'V', 'D', 'K', 'W'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kSaltBytes = 16;
constexpr std::size_t kKeyBytes = crypto_aead_xchacha20poly1305_ietf_KEYBYTES;
constexpr std::size_t kNonceBytes = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;

// Desk-scale KDF cost; recorded in the header so files stay self-describing.
constexpr std::uint64_t kOpsLimit = crypto_pwhash_OPSLIMIT_MIN;
constexpr std::uint64_t kMemLimit = crypto_pwhash_MEMLIMIT_MIN;

void put_u32(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_field(Bytes& out, ByteView field) {
    put_u32(out, static_cast<std::uint32_t>(field.size()));
    out.insert(out.end(), field.begin(), field.end());
}

struct Reader {
    ByteView data;
    std::size_t pos = 0;

    ByteView take(std::size_t n) {
        if (pos + n > data.size()) throw WalletError("wallet file truncated");
        ByteView v = data.subspan(pos, n);
        pos += n;
        return v;
    }
    std::uint32_t u32() {
        auto v = take(4);
        std::uint32_t r = 0;
        for (int i = 0; i < 4; ++i) r |= static_cast<std::uint32_t>(v[i]) << (8 * i);
        return r;
    }
    std::uint64_t u64() {
        auto v = take(8);
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= static_cast<std::uint64_t>(v[i]) << (8 * i);
        return r;
    }
    ByteView field() { return take(u32()); }
};

std::array<std::uint8_t, kKeyBytes> derive_key(std::string_view passphrase, ByteView salt,
                                               std::uint64_t opslimit, std::uint64_t memlimit) {
    std::array<std::uint8_t, kKeyBytes> key;
    if (crypto_pwhash(key.data(), key.size(), passphrase.data(), passphrase.size(), salt.data(),
                      opslimit, memlimit, crypto_pwhash_ALG_ARGON2ID13) != 0)
        throw WalletError("key derivation failed (out of memory?)");
    return key;
}

}  // namespace

const Json& Wallet::get(const std::string& name) const {
    auto it = records_.find(name);
    if (it == records_.end()) throw NotFoundError("wallet record not found: " + name);
    return it->second;
}

std::vector<std::string> Wallet::names() const {
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& [k, v] : records_) out.push_back(k);
    return out;
}

void Wallet::put_keypair(const std::string& name, const crypto::KeyPair& kp) {
    put(name, Json{{"public_key", kp.public_key.hex()}, {"secret_key", kp.secret_key.hex()}});
}

crypto::KeyPair Wallet::keypair(const std::string& name) const {
    const Json& j = get(name);
    crypto::KeyPair kp;
    kp.public_key = crypto::PublicKey::from_hex_str(get_field<std::string>(j, "public_key"));
    kp.secret_key = crypto::SecretKey::from_hex_str(get_field<std::string>(j, "secret_key"));
    return kp;
}

Json Wallet::to_json() const {
    Json j = Json::object();
    for (const auto& [k, v] : records_) j[k] = v;
    return j;
}

Wallet Wallet::from_json(const Json& j) {
    Wallet w;
    for (auto it = j.begin(); it != j.end(); ++it) w.put(it.key(), it.value());
    return w;
}

Bytes wallet_store(const Wallet& wallet, std::string_view passphrase, Rng& rng) {
    crypto::init();
    if (passphrase.empty()) throw WalletError("empty passphrase");

    std::array<std::uint8_t, kSaltBytes> salt;
    rng.fill(salt);
    std::array<std::uint8_t, kNonceBytes> nonce;
    rng.fill(nonce);

    auto key = derive_key(passphrase, {salt.data(), salt.size()}, kOpsLimit, kMemLimit);

    Bytes plain = canonical_bytes(wallet.to_json());
    Bytes cipher(plain.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
    unsigned long long clen = 0;
    crypto_aead_xchacha20poly1305_ietf_encrypt(cipher.data(), &clen, plain.data(), plain.size(),
                                               nullptr, 0, nullptr, nonce.data(), key.data());
    cipher.resize(clen);
    sodium_memzero(key.data(), key.size());
    sodium_memzero(plain.data(), plain.size());

    Bytes out;
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kVersion);
    put_field(out, {salt.data(), salt.size()});
    put_u64(out, kOpsLimit);
    put_u64(out, kMemLimit);
    put_field(out, {nonce.data(), nonce.size()});
    put_field(out, cipher);
    return out;
}

Wallet wallet_load(ByteView file_bytes, std::string_view passphrase) {
    crypto::init();
    if (file_bytes.size() < 5 || std::memcmp(file_bytes.data(), kMagic, 4) != 0)
        throw WalletError("not a wallet file");
    if (file_bytes[4] != kVersion)
        throw WalletError("unsupported wallet version " + std::to_string(file_bytes[4]));

    Reader r{file_bytes, 5};
    ByteView salt = r.field();
    if (salt.size() != kSaltBytes) throw WalletError("bad salt length");
    std::uint64_t ops = r.u64();
    std::uint64_t mem = r.u64();
    ByteView nonce = r.field();
    if (nonce.size() != kNonceBytes) throw WalletError("bad nonce length");
    ByteView cipher = r.field();

    auto key = derive_key(passphrase, salt, ops, mem);

    Bytes plain(cipher.size());
    unsigned long long mlen = 0;
    int rc = crypto_aead_xchacha20poly1305_ietf_decrypt(plain.data(), &mlen, nullptr,
                                                        cipher.data(), cipher.size(), nullptr, 0,
                                                        nonce.data(), key.data());
    sodium_memzero(key.data(), key.size());
    if (rc != 0) throw AuthError("wallet authentication failed (wrong passphrase?)");
    plain.resize(mlen);

    Json j = Json::parse(as_string(plain), nullptr, false);
    if (j.is_discarded()) throw WalletError("wallet payload is not valid JSON");
    return Wallet::from_json(j);
}

void wallet_save_file(const std::filesystem::path& path, const Wallet& wallet,
                      std::string_view passphrase, Rng& rng) {
    Bytes data = wallet_store(wallet, passphrase, rng);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open wallet file for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!f) throw IoError("failed writing wallet file: " + path.string());
}

Wallet wallet_load_file(const std::filesystem::path& path, std::string_view passphrase) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open wallet file: " + path.string());
    Bytes data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return wallet_load(data, passphrase);
}

}  // namespace vdkms
