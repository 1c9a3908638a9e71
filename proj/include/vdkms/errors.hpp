#pragma once

#include <stdexcept>
#include <string>

namespace vdkms {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad hex, wrong length, unparseable serialization.
struct ParseError : Error {
    using Error::Error;
};

struct CryptoError : Error {
    using Error::Error;
};

/// Authentication failure: AEAD tag mismatch, wrong passphrase, bad signature
/// where the caller asked for a hard failure.
struct AuthError : CryptoError {
    using CryptoError::CryptoError;
};

struct WalletError : Error {
    using Error::Error;
};

struct NotFoundError : Error {
    using Error::Error;
};

struct LedgerError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace vdkms
