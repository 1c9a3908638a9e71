#pragma once

// Direct-apply ledger harness for unit tests: commits transactions through
// real block construction and apply_block, without running consensus.

#include <vdkms/ledger.hpp>
#include <vdkms/rng.hpp>

namespace vdkms_test {

using namespace vdkms;

struct TestLedger {
    ledger::Block genesis_block;
    std::vector<ledger::Block> chain;
    ledger::LedgerState state;
    std::int64_t now_s = 1'700'000'000;

    explicit TestLedger(const ledger::GenesisConfig& config)
        : genesis_block(ledger::make_genesis_block(config)),
          state(ledger::genesis_state(genesis_block)) {
        chain.push_back(genesis_block);
    }

    /// Builds and applies one block from the given transactions; returns the
    /// per-transaction rejections (empty entries committed).
    std::vector<ledger::RejectedTxn> commit(std::vector<ledger::Transaction> txns) {
        ledger::Block block;
        block.height = state.height + 1;
        block.prev_hash = chain.back().digest();
        block.txns = std::move(txns);
        ledger::LedgerState spec = state;
        for (const auto& t : block.txns) ledger::try_apply_txn(spec, t, std::nullopt);
        block.state_root = spec.state_root();

        auto applied = ledger::apply_block(state, block);
        state = std::move(applied.state);
        chain.push_back(block);
        return std::move(applied.rejected);
    }

    ledger::Snapshot snapshot() const { return ledger::Snapshot(state); }
};

/// Registrar key pair + genesis listing it, for one-registrar tests.
struct RegistrarFixture {
    crypto::KeyPair keys;
    identity::Did did;
    ledger::GenesisConfig genesis;

    explicit RegistrarFixture(Rng& rng) {
        keys = crypto::keygen(rng);
        did = identity::did_from_key(keys.public_key);
        genesis.registrars.emplace_back(did, keys.public_key);
        rng.fill(genesis.vin_index_key.bytes);
    }
};

}  // namespace vdkms_test
