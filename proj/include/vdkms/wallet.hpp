#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "vdkms/crypto.hpp"
#include "vdkms/json.hpp"
#include "vdkms/rng.hpp"

namespace vdkms {

/// Encrypted key/credential store. In memory it is a named record map; on
/// disk it is an AEAD-sealed file with the key derived from a passphrase
/// (Argon2id, parameters recorded in the header).
class Wallet {
public:
    Wallet() = default;

    bool has(const std::string& name) const { return records_.count(name) != 0; }
    void put(const std::string& name, Json value) { records_[name] = std::move(value); }
    const Json& get(const std::string& name) const;
    void erase(const std::string& name) { records_.erase(name); }
    std::vector<std::string> names() const;
    std::size_t size() const { return records_.size(); }

    void put_keypair(const std::string& name, const crypto::KeyPair& kp);
    crypto::KeyPair keypair(const std::string& name) const;

    Json to_json() const;
    static Wallet from_json(const Json& j);

private:
    std::map<std::string, Json> records_;
};

/// Serialize and encrypt; layout is "VDKW" magic, version byte, then
/// length-prefixed fields (salt, KDF parameters, AEAD nonce, ciphertext).
Bytes wallet_store(const Wallet& wallet, std::string_view passphrase, Rng& rng);

/// Decrypt a wallet_store() image. Throws AuthError on a wrong passphrase and
/// WalletError on a bad header or version.
Wallet wallet_load(ByteView file_bytes, std::string_view passphrase);

void wallet_save_file(const std::filesystem::path& path, const Wallet& wallet,
                      std::string_view passphrase, Rng& rng);
Wallet wallet_load_file(const std::filesystem::path& path, std::string_view passphrase);

}  // namespace vdkms
