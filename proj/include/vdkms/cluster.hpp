#pragma once

#include <deque>
#include <functional>
#include <memory>

#include "vdkms/clock.hpp"
#include "vdkms/consensus.hpp"

namespace vdkms {

/// Submit + read interface agents and tools use against any ledger backing
/// (in-process cluster, HTTP endpoint).
class LedgerClient {
public:
    struct SubmitOutcome {
        bool committed = false;
        std::string reason;  // set when rejected
        std::uint64_t height = 0;
    };

    virtual ~LedgerClient() = default;
    virtual SubmitOutcome submit(const ledger::Transaction& txn) = 0;
    virtual ledger::Snapshot snapshot() = 0;
    virtual std::int64_t now_s() = 0;
};

/// Node key pairs plus the genesis bootstrap they appear in.
struct ClusterSetup {
    ledger::GenesisConfig genesis;
    std::vector<crypto::KeyPair> node_keys;
};

ClusterSetup make_cluster_setup(std::uint32_t n,
                                std::vector<std::pair<identity::Did, crypto::PublicKey>> registrars,
                                Rng& rng);

/// In-process consortium: n replicas joined by an instant loopback transport
/// driven on a virtual clock. pump() runs message delivery and ticks until
/// the cluster is quiescent, so submissions commit synchronously at desk
/// scale. Deterministic for a fixed input sequence.
class Cluster : public LedgerClient {
public:
    static constexpr std::int64_t kEpochMs = 1'700'000'000'000;

    Cluster(const ClusterSetup& setup, std::size_t batch_size = 8,
            std::int64_t view_timeout_ms = 2000);

    /// Replays previously committed blocks (e.g. from a BlockStore) into all
    /// replicas; must be called before any submissions.
    void replay(const std::vector<ledger::Block>& blocks);

    /// Registers a sink invoked once per newly committed block, in order.
    void on_commit(std::function<void(const consensus::CommittedBlock&)> sink);

    SubmitOutcome submit(const ledger::Transaction& txn) override;
    ledger::Snapshot snapshot() override;
    std::int64_t now_s() override { return clock_.now_s(); }

    ManualClock& clock() { return clock_; }
    void pump();

    const consensus::Replica& replica(consensus::NodeId id) const { return *replicas_.at(id); }
    std::uint64_t height() const;

private:
    struct Pending {
        consensus::NodeId to;
        consensus::ConsensusMessage msg;
    };

    void absorb(consensus::NodeId from, consensus::StepResult&& result);

    ManualClock clock_{kEpochMs};
    std::vector<std::unique_ptr<consensus::Replica>> replicas_;
    std::deque<Pending> queue_;
    std::map<Digest, std::pair<std::uint64_t, std::string>> txn_outcomes_;  // ""=applied
    std::uint64_t committed_height_ = 0;
    std::function<void(const consensus::CommittedBlock&)> commit_sink_;
    std::map<Digest, std::string> admission_rejections_;
};

}  // namespace vdkms
