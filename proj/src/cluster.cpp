#include "vdkms/cluster.hpp"

namespace vdkms {

ClusterSetup make_cluster_setup(std::uint32_t n,
                                std::vector<std::pair<identity::Did, crypto::PublicKey>> registrars,
                                Rng& rng) {
    ClusterSetup setup;
    setup.genesis.registrars = std::move(registrars);
    Digest key;
    rng.fill(key.bytes);
    setup.genesis.vin_index_key = key;
    for (std::uint32_t i = 0; i < n; ++i) {
        auto kp = crypto::keygen(rng);
        setup.genesis.nodes.push_back({i, kp.public_key});
        setup.node_keys.push_back(std::move(kp));
    }
    return setup;
}

Cluster::Cluster(const ClusterSetup& setup, std::size_t batch_size,
                 std::int64_t view_timeout_ms) {
    auto genesis_block = ledger::make_genesis_block(setup.genesis);
    const auto n = static_cast<std::uint32_t>(setup.genesis.nodes.size());
    for (std::uint32_t i = 0; i < n; ++i) {
        auto cfg = consensus::ReplicaConfig::make(n, i, batch_size, view_timeout_ms);
        replicas_.push_back(
            std::make_unique<consensus::Replica>(cfg, setup.node_keys.at(i), genesis_block));
    }
}

void Cluster::replay(const std::vector<ledger::Block>& blocks) {
    for (const auto& block : blocks) {
        if (block.height == 0) continue;  // genesis is built in
        consensus::CommittedBlock committed;
        for (auto& r : replicas_) committed = r->replay_committed(block);
        committed_height_ = block.height;
        for (const auto& txn : committed.block.txns)
            txn_outcomes_[txn.digest()] = {block.height, ""};
        for (const auto& rej : committed.rejected)
            txn_outcomes_[rej.txn] = {block.height, rej.reason};
    }
}

void Cluster::on_commit(std::function<void(const consensus::CommittedBlock&)> sink) {
    commit_sink_ = std::move(sink);
}

void Cluster::absorb(consensus::NodeId from, consensus::StepResult&& result) {
    for (auto& out : result.messages) {
        if (out.to) {
            queue_.push_back({*out.to, std::move(out.msg)});
        } else {
            for (auto& r : replicas_)
                if (r->id() != from) queue_.push_back({r->id(), out.msg});
        }
    }
    for (auto& rej : result.admission_rejected)
        admission_rejections_[rej.txn] = rej.reason;
    for (auto& cb : result.committed) {
        if (cb.block.height <= committed_height_) continue;  // already seen
        committed_height_ = cb.block.height;
        for (const auto& txn : cb.block.txns)
            txn_outcomes_[txn.digest()] = {cb.block.height, ""};
        for (const auto& rej : cb.rejected)
            txn_outcomes_[rej.txn] = {cb.block.height, rej.reason};
        if (commit_sink_) commit_sink_(cb);
    }
}

void Cluster::pump() {
    const std::int64_t tick = replicas_.front()->config().tick_ms();
    std::size_t steps = 0;
    constexpr std::size_t kMaxSteps = 5'000'000;
    constexpr std::int64_t kMaxVirtualMs = 3'600'000;
    const std::int64_t deadline = clock_.now_ms() + kMaxVirtualMs;

    while (true) {
        if (++steps > kMaxSteps || clock_.now_ms() > deadline)
            throw LedgerError("embedded cluster failed to quiesce");
        if (!queue_.empty()) {
            Pending p = std::move(queue_.front());
            queue_.pop_front();
            auto& replica = *replicas_.at(p.to);
            absorb(p.to, replica.on_message(p.msg, clock_.now_ms()));
            continue;
        }
        bool busy = false;
        for (auto& r : replicas_) busy = busy || r->busy();
        if (!busy) break;
        clock_.advance_ms(tick);
        for (auto& r : replicas_) absorb(r->id(), r->on_tick(clock_.now_ms()));
    }
}

Cluster::SubmitOutcome Cluster::submit(const ledger::Transaction& txn) {
    Digest id = txn.digest();
    auto& guide = *replicas_.front();
    consensus::NodeId leader = guide.config().leader_of(guide.view());
    absorb(leader, replicas_.at(leader)->on_client_txn(txn, clock_.now_ms()));
    pump();

    SubmitOutcome out;
    if (auto it = txn_outcomes_.find(id); it != txn_outcomes_.end()) {
        out.committed = it->second.second.empty();
        out.reason = it->second.second;
        out.height = it->second.first;
        return out;
    }
    if (auto it = admission_rejections_.find(id); it != admission_rejections_.end()) {
        out.committed = false;
        out.reason = it->second;
        return out;
    }
    out.committed = false;
    out.reason = "transaction did not commit";
    return out;
}

ledger::Snapshot Cluster::snapshot() {
    const consensus::Replica* best = replicas_.front().get();
    for (const auto& r : replicas_)
        if (r->committed_height() > best->committed_height()) best = r.get();
    return best->snapshot();
}

std::uint64_t Cluster::height() const { return committed_height_; }

}  // namespace vdkms
