#include "vdkms/consensus.hpp"

#include <algorithm>

namespace vdkms::consensus {

namespace {
constexpr std::size_t kCatchupChunk = 50;
constexpr std::size_t kForwardChunk = 32;
}  // namespace

ReplicaConfig ReplicaConfig::make(std::uint32_t n, NodeId this_node, std::size_t batch_size,
                                  std::int64_t view_timeout_ms) {
    if (n < 4 || (n - 1) % 3 != 0)
        throw Error("node count must be 3f+1 with f >= 1, got " + std::to_string(n));
    ReplicaConfig cfg;
    cfg.n = n;
    cfg.f = (n - 1) / 3;
    for (NodeId i = 0; i < n; ++i) cfg.node_ids.push_back(i);
    cfg.this_node = this_node;
    cfg.batch_size = batch_size;
    cfg.view_timeout_ms = view_timeout_ms;
    return cfg;
}

// ---------------------------------------------------------------------------
// Message serialization

Json body_to_json(const MessageBody& body) {
    return std::visit(
        [](const auto& b) -> Json {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, PrePrepare>) {
                return Json{{"type", "pre_prepare"},
                            {"view", b.view},
                            {"seq", b.seq},
                            {"block", b.block.to_json()}};
            } else if constexpr (std::is_same_v<T, Prepare>) {
                return Json{{"type", "prepare"},
                            {"view", b.view},
                            {"seq", b.seq},
                            {"block_digest", b.block_digest.hex()}};
            } else if constexpr (std::is_same_v<T, Commit>) {
                return Json{{"type", "commit"},
                            {"view", b.view},
                            {"seq", b.seq},
                            {"block_digest", b.block_digest.hex()}};
            } else if constexpr (std::is_same_v<T, ViewChange>) {
                Json j{{"type", "view_change"},
                       {"new_view", b.new_view},
                       {"last_committed", b.last_committed}};
                if (b.prepared)
                    j["prepared"] = Json{{"view", b.prepared->view},
                                         {"seq", b.prepared->seq},
                                         {"block", b.prepared->block.to_json()}};
                return j;
            } else if constexpr (std::is_same_v<T, NewView>) {
                Json j{{"type", "new_view"},
                       {"new_view", b.new_view},
                       {"start_height", b.start_height}};
                if (b.reproposal)
                    j["reproposal"] = Json{{"view", b.reproposal->view},
                                           {"seq", b.reproposal->seq},
                                           {"block", b.reproposal->block.to_json()}};
                return j;
            } else if constexpr (std::is_same_v<T, TxnForward>) {
                Json txns = Json::array();
                for (const auto& t : b.txns) txns.push_back(t.to_json());
                return Json{{"type", "txn_forward"}, {"txns", txns}};
            } else if constexpr (std::is_same_v<T, CatchupRequest>) {
                return Json{{"type", "catchup_request"}, {"have_height", b.have_height}};
            } else if constexpr (std::is_same_v<T, AdmissionReject>) {
                Json ids = Json::array();
                for (const auto& d : b.txn_ids) ids.push_back(d.hex());
                return Json{{"type", "admission_reject"}, {"txn_ids", ids}};
            } else {
                Json blocks = Json::array();
                for (const auto& cb : b.blocks) {
                    Json commits = Json::array();
                    for (const auto& m : cb.commits) commits.push_back(m.to_json());
                    blocks.push_back(Json{{"block", cb.block.to_json()}, {"commits", commits}});
                }
                return Json{{"type", "catchup_response"}, {"blocks", blocks}};
            }
        },
        body);
}

namespace {

PreparedEntry prepared_from_json(const Json& j) {
    PreparedEntry e;
    e.view = get_field<std::uint64_t>(j, "view");
    e.seq = get_field<std::uint64_t>(j, "seq");
    e.block = ledger::Block::from_json(j.at("block"));
    return e;
}

}  // namespace

MessageBody body_from_json(const Json& j) {
    const std::string type = get_field<std::string>(j, "type");
    if (type == "pre_prepare") {
        PrePrepare b;
        b.view = get_field<std::uint64_t>(j, "view");
        b.seq = get_field<std::uint64_t>(j, "seq");
        b.block = ledger::Block::from_json(j.at("block"));
        return b;
    }
    if (type == "prepare" || type == "commit") {
        std::uint64_t view = get_field<std::uint64_t>(j, "view");
        std::uint64_t seq = get_field<std::uint64_t>(j, "seq");
        Digest d = Digest::from_hex_str(get_field<std::string>(j, "block_digest"));
        if (type == "prepare") return Prepare{view, seq, d};
        return Commit{view, seq, d};
    }
    if (type == "view_change") {
        ViewChange b;
        b.new_view = get_field<std::uint64_t>(j, "new_view");
        b.last_committed = get_field<std::uint64_t>(j, "last_committed");
        if (j.contains("prepared")) b.prepared = prepared_from_json(j.at("prepared"));
        return b;
    }
    if (type == "new_view") {
        NewView b;
        b.new_view = get_field<std::uint64_t>(j, "new_view");
        b.start_height = get_field<std::uint64_t>(j, "start_height");
        if (j.contains("reproposal")) b.reproposal = prepared_from_json(j.at("reproposal"));
        return b;
    }
    if (type == "txn_forward") {
        TxnForward b;
        for (const auto& t : j.at("txns")) b.txns.push_back(ledger::Transaction::from_json(t));
        return b;
    }
    if (type == "catchup_request") {
        return CatchupRequest{get_field<std::uint64_t>(j, "have_height")};
    }
    if (type == "admission_reject") {
        AdmissionReject b;
        for (const auto& d : j.at("txn_ids"))
            b.txn_ids.push_back(Digest::from_hex_str(d.get<std::string>()));
        return b;
    }
    if (type == "catchup_response") {
        CatchupResponse b;
        for (const auto& cb : j.at("blocks")) {
            CertifiedBlock e;
            e.block = ledger::Block::from_json(cb.at("block"));
            for (const auto& m : cb.at("commits"))
                e.commits.push_back(ConsensusMessage::from_json(m));
            b.blocks.push_back(std::move(e));
        }
        return b;
    }
    throw ParseError("unknown consensus message type: " + type);
}

std::uint64_t ConsensusMessage::view_of() const {
    return std::visit(
        [](const auto& b) -> std::uint64_t {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, PrePrepare> || std::is_same_v<T, Prepare> ||
                          std::is_same_v<T, Commit>)
                return b.view;
            else if constexpr (std::is_same_v<T, NewView>)
                return b.new_view;
            else
                return 0;
        },
        body);
}

Bytes ConsensusMessage::signing_bytes() const {
    return canonical_bytes(Json{{"body", body_to_json(body)}, {"sender", sender}});
}

Json ConsensusMessage::to_json() const {
    return Json{{"body", body_to_json(body)}, {"sender", sender}, {"signature", signature.hex()}};
}

ConsensusMessage ConsensusMessage::from_json(const Json& j) {
    ConsensusMessage m;
    m.body = body_from_json(j.at("body"));
    m.sender = get_field<NodeId>(j, "sender");
    m.signature = crypto::Signature::from_hex_str(get_field<std::string>(j, "signature"));
    return m;
}

void StepResult::merge(StepResult&& other) {
    for (auto& m : other.messages) messages.push_back(std::move(m));
    for (auto& c : other.committed) committed.push_back(std::move(c));
    for (auto& r : other.admission_rejected) admission_rejected.push_back(std::move(r));
    queue_full = queue_full || other.queue_full;
}

// ---------------------------------------------------------------------------
// Replica

Replica::Replica(ReplicaConfig cfg, crypto::KeyPair node_key, ledger::Block genesis_block)
    : cfg_(std::move(cfg)), key_(std::move(node_key)) {
    state_ = ledger::genesis_state(genesis_block);
    chain_.push_back(std::move(genesis_block));
    for (const auto& n : state_.nodes) node_keys_[n.id] = n.public_key;
    if (node_keys_.size() != cfg_.n)
        throw Error("genesis node set does not match replica config");
    if (node_keys_.at(cfg_.this_node) != key_.public_key)
        throw Error("replica key does not match genesis identity");
}

ConsensusMessage Replica::make_msg(MessageBody body) const {
    ConsensusMessage m;
    m.body = std::move(body);
    m.sender = cfg_.this_node;
    m.signature = crypto::sign(key_.secret_key, m.signing_bytes());
    return m;
}

void Replica::send_all(StepResult& out, MessageBody body) const {
    out.messages.push_back({std::nullopt, make_msg(std::move(body))});
}

void Replica::send_to(StepResult& out, NodeId to, MessageBody body) const {
    out.messages.push_back({to, make_msg(std::move(body))});
}

bool Replica::sender_known(const ConsensusMessage& msg) const {
    if (msg.sender == cfg_.this_node) return false;
    auto it = node_keys_.find(msg.sender);
    if (it == node_keys_.end()) return false;
    return crypto::verify(it->second, msg.signing_bytes(), msg.signature);
}

ledger::Snapshot Replica::snapshot() const {
    if (!snapshot_cache_) snapshot_cache_ = std::make_shared<const ledger::LedgerState>(state_);
    return ledger::Snapshot(snapshot_cache_);
}

// --------------------------------------------------------------------- txns

void Replica::enqueue_pending(const ledger::Transaction& txn, std::int64_t,
                              StepResult& out) {
    Digest id = txn.digest();
    if (pending_ids_.count(id)) return;
    Bytes nk = concat({as_bytes(txn.author.str()), txn.nonce.view()});
    if (state_.used_nonces.count(crypto::digest(nk))) return;  // already committed
    if (pending_.size() >= cfg_.max_pending) {
        out.queue_full = true;
        return;
    }
    pending_.push_back(txn);
    pending_ids_.insert(id);
}

StepResult Replica::on_client_txn(const ledger::Transaction& txn, std::int64_t now_ms) {
    StepResult out;
    enqueue_pending(txn, now_ms, out);
    if (is_leader()) {
        if (!in_flight_ && !changing_ && pending_.size() >= cfg_.batch_size)
            propose(out, now_ms);
    } else {
        send_to(out, cfg_.leader_of(view_), TxnForward{{txn}});
    }
    return out;
}

void Replica::propose(StepResult& out, std::int64_t now_ms) {
    if (in_flight_ || changing_ || pending_.empty()) return;
    if (cfg_.leader_of(view_) != cfg_.this_node) return;

    ledger::LedgerState spec = state_;
    std::vector<ledger::Transaction> batch;
    std::vector<Digest> dropped;
    for (const auto& txn : pending_) {
        if (batch.size() >= cfg_.batch_size) break;
        auto r = ledger::try_apply_txn(spec, txn, now_ms / 1000);
        if (r.ok) {
            batch.push_back(txn);
        } else {
            out.admission_rejected.push_back({txn.digest(), r.reason});
            dropped.push_back(txn.digest());
        }
    }
    for (const auto& id : dropped) {
        pending_ids_.erase(id);
        for (auto it = pending_.begin(); it != pending_.end(); ++it)
            if (it->digest() == id) {
                pending_.erase(it);
                break;
            }
    }
    if (!dropped.empty()) send_all(out, AdmissionReject{std::move(dropped)});
    if (batch.empty()) return;

    ledger::Block block;
    block.height = state_.height + 1;
    block.prev_hash = chain_.back().digest();
    block.txns = std::move(batch);
    block.state_root = spec.state_root();
    spec.height = block.height;
    spec.last_block_hash = block.digest();

    Proposal p;
    p.view = view_;
    p.seq = block.height;
    p.block_digest = block.digest();
    p.block = std::move(block);
    p.post_state = std::move(spec);
    p.prepares.insert(cfg_.this_node);
    in_flight_ = std::move(p);
    preprepare_digests_[{view_, in_flight_->seq}] = in_flight_->block_digest;

    send_all(out, PrePrepare{view_, in_flight_->seq, in_flight_->block});
    progress(now_ms);
    merge_buffered_votes(out, now_ms);
    check_prepare_quorum(out, now_ms);
}

// ------------------------------------------------------------------ accept

void Replica::accept_proposal(StepResult& out, std::uint64_t view, const ledger::Block& block,
                              std::int64_t now_ms) {
    if (block.height != state_.height + 1) return;
    if (block.prev_hash != chain_.back().digest()) return;

    // Deterministic re-execution; apply_block rejects a bad state root.
    ledger::ApplyResult applied;
    try {
        applied = ledger::apply_block(state_, block);
    } catch (const Error&) {
        return;
    }

    if (in_flight_) discard_in_flight();

    Proposal p;
    p.view = view;
    p.seq = block.height;
    p.block = block;
    p.block_digest = block.digest();
    p.post_state = std::move(applied.state);
    p.apply_rejected = std::move(applied.rejected);
    p.prepares.insert(cfg_.leader_of(view));
    p.prepares.insert(cfg_.this_node);
    in_flight_ = std::move(p);
    preprepare_digests_[{view, in_flight_->seq}] = in_flight_->block_digest;

    if (cfg_.leader_of(view) != cfg_.this_node)
        send_all(out, Prepare{view, in_flight_->seq, in_flight_->block_digest});
    progress(now_ms);
    merge_buffered_votes(out, now_ms);
    check_prepare_quorum(out, now_ms);
}

void Replica::merge_buffered_votes(StepResult& out, std::int64_t now_ms) {
    if (!in_flight_) return;
    VoteKey key{in_flight_->view, in_flight_->seq, in_flight_->block_digest};
    if (auto it = early_prepares_.find(key); it != early_prepares_.end()) {
        for (NodeId s : it->second) in_flight_->prepares.insert(s);
        early_prepares_.erase(it);
    }
    if (auto it = early_commits_.find(key); it != early_commits_.end()) {
        for (auto& [s, m] : it->second) in_flight_->commit_votes.emplace(s, std::move(m));
        early_commits_.erase(it);
    }
    check_prepare_quorum(out, now_ms);
    check_commit_quorum(out, now_ms);
}

void Replica::check_prepare_quorum(StepResult& out, std::int64_t now_ms) {
    if (!in_flight_ || in_flight_->commit_sent) return;
    if (in_flight_->prepares.size() < cfg_.quorum()) return;

    in_flight_->commit_sent = true;
    prepared_record_ = PreparedEntry{in_flight_->view, in_flight_->seq, in_flight_->block};

    ConsensusMessage own =
        make_msg(Commit{in_flight_->view, in_flight_->seq, in_flight_->block_digest});
    in_flight_->commit_votes[cfg_.this_node] = own;
    out.messages.push_back({std::nullopt, std::move(own)});
    progress(now_ms);
    check_commit_quorum(out, now_ms);
}

void Replica::check_commit_quorum(StepResult& out, std::int64_t now_ms) {
    if (!in_flight_) return;
    if (in_flight_->commit_votes.size() < cfg_.quorum()) return;
    commit_in_flight(out, now_ms);
}

void Replica::commit_in_flight(StepResult& out, std::int64_t now_ms) {
    Proposal p = std::move(*in_flight_);
    in_flight_.reset();
    prepared_record_.reset();

    std::vector<ConsensusMessage> cert;
    cert.reserve(p.commit_votes.size());
    for (auto& [s, m] : p.commit_votes) cert.push_back(std::move(m));
    certs_[p.seq] = std::move(cert);

    state_ = std::move(p.post_state);
    snapshot_cache_.reset();
    chain_.push_back(p.block);

    for (const auto& txn : p.block.txns) {
        Digest id = txn.digest();
        if (pending_ids_.erase(id)) {
            for (auto it = pending_.begin(); it != pending_.end(); ++it)
                if (it->digest() == id) {
                    pending_.erase(it);
                    break;
                }
        }
    }

    // Prune per-seq bookkeeping at or below the new height.
    for (auto it = early_prepares_.begin(); it != early_prepares_.end();)
        it = std::get<1>(it->first) <= state_.height ? early_prepares_.erase(it) : ++it;
    for (auto it = early_commits_.begin(); it != early_commits_.end();)
        it = std::get<1>(it->first) <= state_.height ? early_commits_.erase(it) : ++it;
    for (auto it = preprepare_digests_.begin(); it != preprepare_digests_.end();)
        it = it->first.second <= state_.height ? preprepare_digests_.erase(it) : ++it;

    out.committed.push_back({std::move(p.block), std::move(p.apply_rejected)});
    progress(now_ms);
    if (is_leader() && !pending_.empty()) propose(out, now_ms);
}

void Replica::discard_in_flight() {
    if (!in_flight_) return;
    // Give up the in-flight proposal; its transactions go back to pending so
    // a later view can re-propose them (the nonce index deduplicates).
    for (const auto& txn : in_flight_->block.txns) {
        Digest id = txn.digest();
        if (!pending_ids_.count(id)) {
            pending_.push_back(txn);
            pending_ids_.insert(id);
        }
    }
    in_flight_.reset();
}

// ---------------------------------------------------------------- handlers

StepResult Replica::on_message(const ConsensusMessage& msg, std::int64_t now_ms) {
    StepResult out;
    if (!sender_known(msg)) return out;  // unknown sender or bad signature

    std::visit(
        [&](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, PrePrepare>)
                handle_preprepare(out, msg, now_ms);
            else if constexpr (std::is_same_v<T, Prepare>)
                handle_prepare(out, msg, now_ms);
            else if constexpr (std::is_same_v<T, Commit>)
                handle_commit(out, msg, now_ms);
            else if constexpr (std::is_same_v<T, ViewChange>)
                handle_view_change(out, msg, now_ms);
            else if constexpr (std::is_same_v<T, NewView>)
                handle_new_view(out, msg, now_ms);
            else if constexpr (std::is_same_v<T, TxnForward>)
                handle_txn_forward(out, msg, now_ms);
            else if constexpr (std::is_same_v<T, AdmissionReject>)
                handle_admission_reject(msg);
            else if constexpr (std::is_same_v<T, CatchupRequest>)
                handle_catchup_request(out, msg);
            else
                handle_catchup_response(out, msg, now_ms);
        },
        msg.body);
    return out;
}

void Replica::note_peer_view(NodeId sender, std::uint64_t view) {
    auto& v = peer_views_[sender];
    if (view > v) v = view;
}

void Replica::maybe_sync_view(StepResult& out) {
    // f+1 distinct peers operating in a higher view is proof the cluster
    // moved on; jump to the highest view with that much support.
    std::vector<std::uint64_t> higher;
    for (const auto& [node, v] : peer_views_)
        if (v > view_) higher.push_back(v);
    if (higher.size() < cfg_.f + 1) return;
    std::sort(higher.begin(), higher.end(), std::greater<>());
    std::uint64_t target = higher[cfg_.f];  // (f+1)-th largest
    if (target > view_) adopt_view(target);
    (void)out;
}

void Replica::adopt_view(std::uint64_t v) {
    if (v <= view_) return;
    view_ = v;
    if (in_flight_ && in_flight_->view < v) discard_in_flight();
    if (desired_view_ <= v) changing_ = false;
}

void Replica::handle_preprepare(StepResult& out, const ConsensusMessage& msg,
                                std::int64_t now_ms) {
    const auto& pp = std::get<PrePrepare>(msg.body);
    note_peer_view(msg.sender, pp.view);
    if (msg.sender != cfg_.leader_of(pp.view)) return;
    if (pp.view > view_) {
        maybe_sync_view(out);
        if (pp.view != view_) return;  // not synced yet; leader will retransmit
    }
    if (pp.view < view_) return;
    if (changing_ && pp.view < desired_view_) return;
    if (pp.seq <= state_.height) return;
    if (pp.seq > state_.height + 1) {
        request_catchup(out, msg.sender);
        return;
    }

    auto key = std::make_pair(pp.view, pp.seq);
    auto rec = preprepare_digests_.find(key);
    Digest d = pp.block.digest();
    if (rec != preprepare_digests_.end() && rec->second != d) return;  // equivocation

    if (in_flight_ && in_flight_->view == pp.view && in_flight_->seq == pp.seq) {
        if (in_flight_->block_digest == d)
            send_to(out, msg.sender, Prepare{pp.view, pp.seq, d});  // duplicate; re-vote
        return;
    }
    if (in_flight_ && pp.view < in_flight_->view) return;
    accept_proposal(out, pp.view, pp.block, now_ms);
}

void Replica::handle_prepare(StepResult& out, const ConsensusMessage& msg, std::int64_t now_ms) {
    const auto& pr = std::get<Prepare>(msg.body);
    note_peer_view(msg.sender, pr.view);
    maybe_sync_view(out);
    if (pr.view < view_) return;
    if (changing_ && pr.view < desired_view_) return;
    if (pr.seq <= state_.height) return;
    if (pr.seq > state_.height + 1) {
        request_catchup(out, msg.sender);
        return;
    }
    if (in_flight_ && in_flight_->view == pr.view && in_flight_->seq == pr.seq &&
        in_flight_->block_digest == pr.block_digest) {
        in_flight_->prepares.insert(msg.sender);
        check_prepare_quorum(out, now_ms);
    } else {
        early_prepares_[{pr.view, pr.seq, pr.block_digest}].insert(msg.sender);
    }
}

void Replica::handle_commit(StepResult& out, const ConsensusMessage& msg, std::int64_t now_ms) {
    const auto& cm = std::get<Commit>(msg.body);
    note_peer_view(msg.sender, cm.view);
    maybe_sync_view(out);
    if (cm.view < view_) return;
    if (changing_ && cm.view < desired_view_) return;
    if (cm.seq <= state_.height) return;
    if (cm.seq > state_.height + 1) {
        request_catchup(out, msg.sender);
        return;
    }
    if (in_flight_ && in_flight_->view == cm.view && in_flight_->seq == cm.seq &&
        in_flight_->block_digest == cm.block_digest) {
        in_flight_->commit_votes.emplace(msg.sender, msg);
        check_commit_quorum(out, now_ms);
    } else {
        early_commits_[{cm.view, cm.seq, cm.block_digest}].emplace(msg.sender, msg);
    }
}

void Replica::handle_txn_forward(StepResult& out, const ConsensusMessage& msg,
                                 std::int64_t now_ms) {
    const auto& fw = std::get<TxnForward>(msg.body);
    for (const auto& txn : fw.txns) enqueue_pending(txn, now_ms, out);
    if (is_leader() && !in_flight_ && !changing_ && pending_.size() >= cfg_.batch_size)
        propose(out, now_ms);
}

void Replica::handle_admission_reject(const ConsensusMessage& msg) {
    // Leader-signed notice; enough for the crash fault model.
    const auto& rej = std::get<AdmissionReject>(msg.body);
    for (const auto& id : rej.txn_ids) {
        if (!pending_ids_.erase(id)) continue;
        for (auto it = pending_.begin(); it != pending_.end(); ++it)
            if (it->digest() == id) {
                pending_.erase(it);
                break;
            }
    }
}

void Replica::start_view_change(StepResult& out, std::uint64_t target_view,
                                std::int64_t now_ms) {
    if (target_view <= view_) return;
    if (changing_ && desired_view_ >= target_view) return;
    changing_ = true;
    desired_view_ = target_view;
    discard_in_flight();

    ViewChange vc;
    vc.new_view = target_view;
    vc.last_committed = state_.height;
    if (prepared_record_ && prepared_record_->seq == state_.height + 1)
        vc.prepared = prepared_record_;
    view_change_votes_[target_view][cfg_.this_node] = vc;
    send_all(out, vc);
    last_progress_ms_ = now_ms;
    maybe_send_new_view(out, now_ms);
}

void Replica::handle_view_change(StepResult& out, const ConsensusMessage& msg,
                                 std::int64_t now_ms) {
    const auto& vc = std::get<ViewChange>(msg.body);
    if (vc.new_view <= view_) return;
    view_change_votes_[vc.new_view][msg.sender] = vc;

    // Join when f+1 peers already want a higher view than we are moving to.
    std::uint64_t floor = changing_ ? desired_view_ : view_;
    std::vector<std::uint64_t> wanted;
    for (const auto& [nv, votes] : view_change_votes_) {
        if (nv <= floor) continue;
        for (const auto& [node, v] : votes)
            if (node != cfg_.this_node) wanted.push_back(nv);
    }
    if (wanted.size() >= cfg_.f + 1) {
        std::sort(wanted.begin(), wanted.end(), std::greater<>());
        start_view_change(out, wanted[cfg_.f], now_ms);
    }
    maybe_send_new_view(out, now_ms);
}

void Replica::maybe_send_new_view(StepResult& out, std::int64_t now_ms) {
    // Highest view for which we hold a quorum of view changes and would lead.
    for (auto it = view_change_votes_.rbegin(); it != view_change_votes_.rend(); ++it) {
        std::uint64_t nv = it->first;
        if (nv <= view_) break;
        if (cfg_.leader_of(nv) != cfg_.this_node) continue;
        if (it->second.size() < cfg_.quorum()) continue;

        std::uint64_t max_committed = state_.height;
        for (const auto& [node, vc] : it->second)
            max_committed = std::max(max_committed, vc.last_committed);
        if (state_.height < max_committed) {
            // Cannot lead until caught up with the quorum's committed prefix.
            pending_new_view_ = nv;
            for (const auto& [node, vc] : it->second)
                if (vc.last_committed == max_committed && node != cfg_.this_node) {
                    request_catchup(out, node);
                    break;
                }
            return;
        }

        std::optional<PreparedEntry> repro;
        for (const auto& [node, vc] : it->second) {
            if (!vc.prepared || vc.prepared->seq != state_.height + 1) continue;
            if (!repro || vc.prepared->view > repro->view) repro = vc.prepared;
        }
        if (prepared_record_ && prepared_record_->seq == state_.height + 1 &&
            (!repro || prepared_record_->view > repro->view))
            repro = prepared_record_;

        pending_new_view_.reset();
        changing_ = false;
        view_ = nv;
        discard_in_flight();

        NewView msg_out;
        msg_out.new_view = nv;
        msg_out.start_height = state_.height;
        msg_out.reproposal = repro;
        send_all(out, msg_out);
        progress(now_ms);

        if (repro) {
            accept_proposal(out, nv, repro->block, now_ms);
        } else if (!pending_.empty()) {
            propose(out, now_ms);
        }
        return;
    }
}

void Replica::handle_new_view(StepResult& out, const ConsensusMessage& msg,
                              std::int64_t now_ms) {
    const auto& nv = std::get<NewView>(msg.body);
    if (msg.sender != cfg_.leader_of(nv.new_view)) return;
    note_peer_view(msg.sender, nv.new_view);
    if (nv.new_view < view_) return;

    if (nv.new_view > view_) {
        view_ = nv.new_view;
        if (in_flight_ && in_flight_->view < view_) discard_in_flight();
    }
    if (desired_view_ <= view_) changing_ = false;

    if (state_.height < nv.start_height) request_catchup(out, msg.sender);
    if (nv.reproposal && nv.reproposal->seq == state_.height + 1 && !in_flight_)
        accept_proposal(out, nv.new_view, nv.reproposal->block, now_ms);
    progress(now_ms);
}

void Replica::request_catchup(StepResult& out, NodeId from) {
    send_to(out, from, CatchupRequest{state_.height});
}

void Replica::handle_catchup_request(StepResult& out, const ConsensusMessage& msg) {
    const auto& req = std::get<CatchupRequest>(msg.body);
    if (req.have_height >= state_.height) return;
    CatchupResponse resp;
    std::uint64_t from = req.have_height + 1;
    std::uint64_t to = std::min(state_.height, req.have_height + kCatchupChunk);
    for (std::uint64_t h = from; h <= to; ++h) {
        auto cert = certs_.find(h);
        if (cert == certs_.end()) return;  // pre-replayed store without certs
        resp.blocks.push_back({chain_.at(h), cert->second});
    }
    send_to(out, msg.sender, std::move(resp));
}

void Replica::handle_catchup_response(StepResult& out, const ConsensusMessage& msg,
                                      std::int64_t now_ms) {
    const auto& resp = std::get<CatchupResponse>(msg.body);
    bool advanced = false;
    for (const auto& entry : resp.blocks) {
        if (entry.block.height != state_.height + 1) continue;

        // Certificate: 2f+1 distinct nodes' valid Commit signatures over this
        // exact (seq, digest).
        Digest d = entry.block.digest();
        std::set<NodeId> voters;
        for (const auto& cm : entry.commits) {
            if (!std::holds_alternative<Commit>(cm.body)) continue;
            const auto& c = std::get<Commit>(cm.body);
            if (c.seq != entry.block.height || c.block_digest != d) continue;
            auto key = node_keys_.find(cm.sender);
            if (key == node_keys_.end()) continue;
            if (!crypto::verify(key->second, cm.signing_bytes(), cm.signature)) continue;
            voters.insert(cm.sender);
        }
        if (voters.size() < cfg_.quorum()) continue;

        ledger::ApplyResult applied;
        try {
            applied = ledger::apply_block(state_, entry.block);
        } catch (const Error&) {
            continue;
        }
        if (in_flight_ && in_flight_->seq == entry.block.height) discard_in_flight();
        state_ = std::move(applied.state);
        snapshot_cache_.reset();
        chain_.push_back(entry.block);
        certs_[entry.block.height] = entry.commits;
        prepared_record_.reset();

        for (const auto& txn : entry.block.txns) {
            Digest id = txn.digest();
            if (pending_ids_.erase(id)) {
                for (auto it = pending_.begin(); it != pending_.end(); ++it)
                    if (it->digest() == id) {
                        pending_.erase(it);
                        break;
                    }
            }
        }
        out.committed.push_back({entry.block, std::move(applied.rejected)});
        advanced = true;
    }
    if (advanced) {
        progress(now_ms);
        if (resp.blocks.size() == kCatchupChunk) request_catchup(out, msg.sender);
        if (pending_new_view_) maybe_send_new_view(out, now_ms);
    }
}

CommittedBlock Replica::replay_committed(const ledger::Block& block) {
    auto applied = ledger::apply_block(state_, block);
    state_ = std::move(applied.state);
    snapshot_cache_.reset();
    chain_.push_back(block);
    return {block, std::move(applied.rejected)};
}

// -------------------------------------------------------------------- tick

StepResult Replica::on_tick(std::int64_t now_ms) {
    StepResult out;

    if (is_leader() && !in_flight_ && !changing_ && !pending_.empty()) propose(out, now_ms);

    // Retransmit current-phase messages while stalled.
    if (now_ms - last_retransmit_ms_ >= cfg_.tick_ms()) {
        last_retransmit_ms_ = now_ms;
        if (in_flight_) {
            if (cfg_.leader_of(in_flight_->view) == cfg_.this_node)
                send_all(out, PrePrepare{in_flight_->view, in_flight_->seq, in_flight_->block});
            else
                send_all(out,
                         Prepare{in_flight_->view, in_flight_->seq, in_flight_->block_digest});
            if (in_flight_->commit_sent)
                send_all(out,
                         Commit{in_flight_->view, in_flight_->seq, in_flight_->block_digest});
        }
        if (changing_) {
            auto& own = view_change_votes_[desired_view_][cfg_.this_node];
            send_all(out, own);
        }
    }

    // Keep nudging the leader with what we hold.
    if (!is_leader() && !changing_ && !pending_.empty() &&
        now_ms - last_forward_ms_ >= 2 * cfg_.tick_ms()) {
        last_forward_ms_ = now_ms;
        TxnForward fw;
        for (const auto& txn : pending_) {
            fw.txns.push_back(txn);
            if (fw.txns.size() >= kForwardChunk) break;
        }
        send_to(out, cfg_.leader_of(view_), std::move(fw));
    }

    // Stall escalation rotates the leader even when idle.
    std::int64_t budget = cfg_.view_timeout_ms * static_cast<std::int64_t>(escalations_ + 1);
    if (now_ms - last_progress_ms_ > budget) {
        escalations_ += 1;
        start_view_change(out, std::max(view_, desired_view_) + 1, now_ms);
    }
    return out;
}

}  // namespace vdkms::consensus
