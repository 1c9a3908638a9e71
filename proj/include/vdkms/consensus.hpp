#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <variant>
#include <vector>

#include "vdkms/ledger.hpp"

namespace vdkms::consensus {

using NodeId = std::uint32_t;

/// n = 3f+1 consortium configuration; quorum is 2f+1.
struct ReplicaConfig {
    std::uint32_t n = 4;
    std::uint32_t f = 1;
    std::vector<NodeId> node_ids;
    NodeId this_node = 0;
    std::size_t batch_size = 10;
    std::int64_t view_timeout_ms = 2000;
    std::size_t max_pending = 10000;

    std::uint32_t quorum() const { return 2 * f + 1; }
    NodeId leader_of(std::uint64_t view) const { return node_ids[view % node_ids.size()]; }
    std::int64_t tick_ms() const {
        std::int64_t t = view_timeout_ms / 4;
        return t < 25 ? 25 : (t > 500 ? 500 : t);
    }

    /// Canonical config for n nodes (ids 0..n-1); n must be 3f+1.
    static ReplicaConfig make(std::uint32_t n, NodeId this_node, std::size_t batch_size = 10,
                              std::int64_t view_timeout_ms = 2000);
};

// --------------------------------------------------------------------------
// Messages. Everything on the wire is signed by the sending node's key.

struct PrePrepare {
    std::uint64_t view = 0;
    std::uint64_t seq = 0;
    ledger::Block block;
};

struct Prepare {
    std::uint64_t view = 0;
    std::uint64_t seq = 0;
    Digest block_digest;
};

struct Commit {
    std::uint64_t view = 0;
    std::uint64_t seq = 0;
    Digest block_digest;
};

/// Proposal this replica reached a prepare quorum for (carried in view
/// changes so the new leader re-proposes anything that may have committed).
struct PreparedEntry {
    std::uint64_t view = 0;
    std::uint64_t seq = 0;
    ledger::Block block;
};

struct ViewChange {
    std::uint64_t new_view = 0;
    std::uint64_t last_committed = 0;
    std::optional<PreparedEntry> prepared;
};

struct NewView {
    std::uint64_t new_view = 0;
    std::uint64_t start_height = 0;  // max committed height among the quorum
    std::optional<PreparedEntry> reproposal;
};

/// Client transactions relayed to the current leader.
struct TxnForward {
    std::vector<ledger::Transaction> txns;
};

struct CatchupRequest {
    std::uint64_t have_height = 0;
};

/// Leader's notice that queued transactions failed admission and will never
/// be proposed; replicas drop their retained copies.
struct AdmissionReject {
    std::vector<Digest> txn_ids;
};

struct ConsensusMessage;

/// Committed block plus its commit certificate (2f+1 signed Commits).
struct CertifiedBlock {
    ledger::Block block;
    std::vector<ConsensusMessage> commits;
};

struct CatchupResponse {
    std::vector<CertifiedBlock> blocks;
};

using MessageBody = std::variant<PrePrepare, Prepare, Commit, ViewChange, NewView, TxnForward,
                                 CatchupRequest, CatchupResponse, AdmissionReject>;

struct ConsensusMessage {
    MessageBody body;
    NodeId sender = 0;
    crypto::Signature signature;

    std::uint64_t view_of() const;  // view the body claims, 0 for txn/catchup
    Bytes signing_bytes() const;
    Json to_json() const;
    static ConsensusMessage from_json(const Json& j);
};

Json body_to_json(const MessageBody& body);
MessageBody body_from_json(const Json& j);

struct Outbound {
    std::optional<NodeId> to;  // nullopt = broadcast to all other nodes
    ConsensusMessage msg;
};

struct CommittedBlock {
    ledger::Block block;
    std::vector<ledger::RejectedTxn> rejected;  // invalid txns skipped inside
};

struct StepResult {
    std::vector<Outbound> messages;
    std::vector<CommittedBlock> committed;
    std::vector<ledger::RejectedTxn> admission_rejected;  // dropped before proposal
    bool queue_full = false;

    void merge(StepResult&& other);
};

// --------------------------------------------------------------------------

/// Single PBFT replica as a deterministic state machine. The harness owns
/// time and transport: it feeds client transactions, messages and periodic
/// ticks, and delivers whatever comes back. One view runs one leader
/// (round-robin by view number); blocks commit strictly in sequence order.
class Replica {
public:
    Replica(ReplicaConfig cfg, crypto::KeyPair node_key, ledger::Block genesis_block);

    StepResult on_client_txn(const ledger::Transaction& txn, std::int64_t now_ms);
    StepResult on_message(const ConsensusMessage& msg, std::int64_t now_ms);
    /// Periodic driver: batch proposal, retransmission, stall escalation.
    StepResult on_tick(std::int64_t now_ms);

    /// Applies an already-committed block from local storage (startup replay;
    /// not part of the protocol).
    CommittedBlock replay_committed(const ledger::Block& block);

    bool busy() const { return in_flight_.has_value() || changing_ || !pending_.empty(); }

    NodeId id() const { return cfg_.this_node; }
    std::uint64_t view() const { return view_; }
    bool is_leader() const { return cfg_.leader_of(view_) == cfg_.this_node; }
    std::uint64_t committed_height() const { return state_.height; }
    const std::vector<ledger::Block>& chain() const { return chain_; }
    ledger::Snapshot snapshot() const;
    std::size_t pending_count() const { return pending_.size(); }
    const ReplicaConfig& config() const { return cfg_; }

private:
    struct Proposal {
        std::uint64_t view = 0;
        std::uint64_t seq = 0;
        ledger::Block block;
        Digest block_digest;
        ledger::LedgerState post_state;
        std::vector<ledger::RejectedTxn> apply_rejected;
        std::set<NodeId> prepares;                       // senders, incl. self and leader
        std::map<NodeId, ConsensusMessage> commit_votes; // full msgs for the certificate
        bool commit_sent = false;
    };

    using VoteKey = std::tuple<std::uint64_t, std::uint64_t, Digest>;  // view, seq, digest

    ConsensusMessage make_msg(MessageBody body) const;
    void send_all(StepResult& out, MessageBody body) const;
    void send_to(StepResult& out, NodeId to, MessageBody body) const;

    bool sender_known(const ConsensusMessage& msg) const;
    void note_peer_view(NodeId sender, std::uint64_t view);
    void maybe_sync_view(StepResult& out);

    void enqueue_pending(const ledger::Transaction& txn, std::int64_t now_ms, StepResult& out);
    void propose(StepResult& out, std::int64_t now_ms);
    void accept_proposal(StepResult& out, std::uint64_t view, const ledger::Block& block,
                         std::int64_t now_ms);
    void merge_buffered_votes(StepResult& out, std::int64_t now_ms);
    void check_prepare_quorum(StepResult& out, std::int64_t now_ms);
    void check_commit_quorum(StepResult& out, std::int64_t now_ms);
    void commit_in_flight(StepResult& out, std::int64_t now_ms);
    void discard_in_flight();

    void handle_preprepare(StepResult& out, const ConsensusMessage& msg, std::int64_t now_ms);
    void handle_prepare(StepResult& out, const ConsensusMessage& msg, std::int64_t now_ms);
    void handle_commit(StepResult& out, const ConsensusMessage& msg, std::int64_t now_ms);
    void handle_view_change(StepResult& out, const ConsensusMessage& msg, std::int64_t now_ms);
    void handle_new_view(StepResult& out, const ConsensusMessage& msg, std::int64_t now_ms);
    void handle_txn_forward(StepResult& out, const ConsensusMessage& msg, std::int64_t now_ms);
    void handle_admission_reject(const ConsensusMessage& msg);
    void handle_catchup_request(StepResult& out, const ConsensusMessage& msg);
    void handle_catchup_response(StepResult& out, const ConsensusMessage& msg,
                                 std::int64_t now_ms);

    void start_view_change(StepResult& out, std::uint64_t target_view, std::int64_t now_ms);
    void maybe_send_new_view(StepResult& out, std::int64_t now_ms);
    void adopt_view(std::uint64_t v);
    void request_catchup(StepResult& out, NodeId from);
    void progress(std::int64_t now_ms) { last_progress_ms_ = now_ms; escalations_ = 0; }

    ReplicaConfig cfg_;
    crypto::KeyPair key_;
    std::map<NodeId, crypto::PublicKey> node_keys_;

    std::vector<ledger::Block> chain_;
    ledger::LedgerState state_;
    mutable std::shared_ptr<const ledger::LedgerState> snapshot_cache_;
    std::map<std::uint64_t, std::vector<ConsensusMessage>> certs_;  // height -> commit msgs

    std::uint64_t view_ = 0;
    std::optional<Proposal> in_flight_;
    std::optional<PreparedEntry> prepared_record_;  // highest prepare quorum for next seq

    std::deque<ledger::Transaction> pending_;
    std::set<Digest> pending_ids_;

    // Out-of-order votes for the next sequence, keyed (view, seq, digest).
    std::map<VoteKey, std::set<NodeId>> early_prepares_;
    std::map<VoteKey, std::map<NodeId, ConsensusMessage>> early_commits_;
    std::map<std::pair<std::uint64_t, std::uint64_t>, Digest> preprepare_digests_;

    // View change bookkeeping.
    bool changing_ = false;
    std::uint64_t desired_view_ = 0;
    std::map<std::uint64_t, std::map<NodeId, ViewChange>> view_change_votes_;
    std::map<NodeId, std::uint64_t> peer_views_;
    std::optional<std::uint64_t> pending_new_view_;  // waiting for catch-up

    std::int64_t last_progress_ms_ = 0;
    std::int64_t last_retransmit_ms_ = 0;
    std::int64_t last_forward_ms_ = 0;
    std::uint32_t escalations_ = 0;
};

}  // namespace vdkms::consensus
