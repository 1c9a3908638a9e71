#include "vdkms/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "vdkms/cluster.hpp"
#include "vdkms/credentials.hpp"
#include "vdkms/vin.hpp"

namespace vdkms::simnet {

const char* to_string(TxnClass c) {
    switch (c) {
        case TxnClass::did_reg: return "DID_REG";
        case TxnClass::schema_def: return "SCHEMA_DEF";
        case TxnClass::cred_reg: return "CRED_REG";
    }
    return "UNKNOWN";
}

namespace {

constexpr std::array<TxnClass, 3> kClasses{TxnClass::did_reg, TxnClass::schema_def,
                                           TxnClass::cred_reg};

}  // namespace

void SimConfig::validate() const {
    if (nodes < 4 || (nodes - 1) % 3 != 0) throw Error("nodes must be 3f+1 with f >= 1");
    if (duration_s <= 0) throw Error("duration must be positive");
    double sum = txn_mix[0] + txn_mix[1] + txn_mix[2];
    if (std::abs(sum - 1.0) > 1e-9) throw Error("txn_mix weights must sum to 1");
    for (double w : txn_mix)
        if (w < 0.0) throw Error("txn_mix weights must be non-negative");
    if (txn_rate_per_s < 0.0) throw Error("negative txn rate");
    if (latency_min_ms < 0 || latency_max_ms < latency_min_ms) throw Error("bad latency range");
    if (drop_rate < 0.0 || drop_rate > 1.0) throw Error("drop_rate must be in [0,1]");
    if (metrics_bucket_s <= 0) throw Error("metrics bucket must be positive");
    for (const auto& cw : crash_schedule) {
        if (cw.node >= nodes) throw Error("crash schedule names unknown node");
        if (cw.down_from_s < 0 || cw.up_at_s <= cw.down_from_s || cw.up_at_s > duration_s)
            throw Error("crash window outside run duration");
    }
    if (registrars < 1) throw Error("at least one registrar required");
}

Json SimConfig::to_json() const {
    Json crash = Json::array();
    for (const auto& cw : crash_schedule)
        crash.push_back(Json{
            {"node", cw.node}, {"down_from_s", cw.down_from_s}, {"up_at_s", cw.up_at_s}});
    return Json{
        {"batch_size", batch_size},
        {"crash_schedule", crash},
        {"drop_rate", drop_rate},
        {"duration_s", duration_s},
        {"latency_max_ms", latency_max_ms},
        {"latency_min_ms", latency_min_ms},
        {"metrics_bucket_s", metrics_bucket_s},
        {"nodes", nodes},
        {"providers", providers},
        {"registrars", registrars},
        {"seed", seed},
        {"txn_mix", txn_mix},
        {"txn_rate_per_s", txn_rate_per_s},
        {"vehicles", vehicles},
        {"view_timeout_ms", view_timeout_ms},
    };
}

SimConfig SimConfig::from_json(const Json& j) {
    SimConfig c;
    c.seed = get_field<std::uint64_t>(j, "seed");
    c.duration_s = get_field<std::int64_t>(j, "duration_s");
    c.nodes = get_field<std::uint32_t>(j, "nodes");
    c.batch_size = get_field<std::size_t>(j, "batch_size");
    c.view_timeout_ms = get_field<std::int64_t>(j, "view_timeout_ms");
    c.vehicles = get_field<std::uint32_t>(j, "vehicles");
    c.providers = get_field<std::uint32_t>(j, "providers");
    c.registrars = get_field<std::uint32_t>(j, "registrars");
    auto mix = get_field<std::vector<double>>(j, "txn_mix");
    if (mix.size() != 3) throw ParseError("txn_mix must have three weights");
    c.txn_mix = {mix[0], mix[1], mix[2]};
    c.txn_rate_per_s = get_field<double>(j, "txn_rate_per_s");
    c.latency_min_ms = get_field<std::int64_t>(j, "latency_min_ms");
    c.latency_max_ms = get_field<std::int64_t>(j, "latency_max_ms");
    c.drop_rate = get_field<double>(j, "drop_rate");
    for (const auto& cw : j.at("crash_schedule")) {
        CrashWindow w;
        w.node = get_field<consensus::NodeId>(cw, "node");
        w.down_from_s = get_field<std::int64_t>(cw, "down_from_s");
        w.up_at_s = get_field<std::int64_t>(cw, "up_at_s");
        c.crash_schedule.push_back(w);
    }
    c.metrics_bucket_s = get_field<std::int64_t>(j, "metrics_bucket_s");
    return c;
}

SimConfig paper_interruption_scenario(std::uint32_t nodes, std::uint32_t crash_count,
                                      std::uint64_t seed) {
    SimConfig c;
    c.seed = seed;
    c.nodes = nodes;
    c.duration_s = 600;
    c.metrics_bucket_s = 60;
    c.txn_rate_per_s = 4.0;
    c.txn_mix = {0.4, 0.2, 0.4};
    c.batch_size = 10;
    c.view_timeout_ms = 2000;
    c.vehicles = 30;
    c.latency_min_ms = 5;
    c.latency_max_ms = 50;
    c.drop_rate = 0.0;
    // Outage at the same relative position as the original run: 40% to 60%.
    std::int64_t from = c.duration_s * 2 / 5;
    std::int64_t to = c.duration_s * 3 / 5;
    for (std::uint32_t i = 0; i < crash_count; ++i)
        c.crash_schedule.push_back({nodes - 1 - i, from, to});
    return c;
}

std::vector<InjectEvent> workload(const SimConfig& config, Rng& rng) {
    std::vector<InjectEvent> events;
    if (config.txn_rate_per_s <= 0.0) return events;
    double t_ms = 0.0;
    const double horizon_ms = static_cast<double>(config.duration_s) * 1000.0;
    while (true) {
        t_ms += rng.exponential(config.txn_rate_per_s) * 1000.0;
        if (t_ms >= horizon_ms) break;
        double pick = rng.uniform_unit();
        TxnClass cls = TxnClass::cred_reg;
        if (pick < config.txn_mix[0])
            cls = TxnClass::did_reg;
        else if (pick < config.txn_mix[0] + config.txn_mix[1])
            cls = TxnClass::schema_def;
        events.push_back({static_cast<std::int64_t>(t_ms), cls});
    }
    return events;
}

// ---------------------------------------------------------------------------

namespace {

struct Event {
    std::int64_t at_ms;
    std::uint64_t order;
    enum class Kind { deliver, tick, crash, recover, inject, inject_def } kind;
    consensus::NodeId node = 0;
    consensus::ConsensusMessage msg;
    TxnClass txn_class = TxnClass::did_reg;
    Digest def_schema;  // inject_def: schema txn this definition waits on

    bool operator>(const Event& o) const {
        return std::tie(at_ms, order) > std::tie(o.at_ms, o.order);
    }
};

struct TrackedTxn {
    TxnClass txn_class;
    std::int64_t injected_ms;
};

struct Engine {
    const SimConfig& cfg;
    SeededRng rt;   // runtime draws, consumed in event order
    SeededRng keys; // key material for actors created during the run

    std::vector<std::unique_ptr<consensus::Replica>> replicas;
    std::vector<bool> live;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
    std::uint64_t order = 0;

    crypto::KeyPair registrar_keys;
    identity::Did registrar_did;
    credentials::Schema base_schema;
    credentials::CredentialDefinition base_def;
    Digest vin_key;

    std::vector<std::pair<identity::Did, crypto::PublicKey>> vehicle_pool;
    std::set<std::string> used_vins;
    std::uint64_t schema_counter = 0;

    std::map<Digest, TrackedTxn> tracked;
    std::map<Digest, std::int64_t> committed_at;        // txn -> first commit ms
    std::map<Digest, std::string> rejected_reason;
    std::map<Digest, std::pair<credentials::Schema, std::int64_t>> pending_defs;
    std::uint64_t global_committed_height = 0;

    explicit Engine(const SimConfig& c)
        : cfg(c), rt(SeededRng(c.seed).fork("runtime")), keys(SeededRng(c.seed).fork("keys")) {}

    void push(Event e) {
        e.order = order++;
        queue.push(std::move(e));
    }

    static Event make_event(std::int64_t at_ms, Event::Kind kind, consensus::NodeId node = 0) {
        Event e;
        e.at_ms = at_ms;
        e.kind = kind;
        e.node = node;
        return e;
    }

    std::int64_t now_ms = 0;
    std::int64_t end_ms() const { return cfg.duration_s * 1000; }

    bool node_live_at(consensus::NodeId id, std::int64_t t_s) const {
        for (const auto& cw : cfg.crash_schedule)
            if (cw.node == id && t_s >= cw.down_from_s && t_s < cw.up_at_s) return false;
        return true;
    }

    // ------------------------------------------------------------- setup

    void setup() {
        auto setup_rng = SeededRng(cfg.seed).fork("setup");
        registrar_keys = crypto::keygen(setup_rng);
        registrar_did = identity::did_from_key(registrar_keys.public_key);

        auto cluster_setup =
            make_cluster_setup(cfg.nodes, {{registrar_did, registrar_keys.public_key}}, setup_rng);
        vin_key = cluster_setup.genesis.vin_index_key;
        auto genesis_block = ledger::make_genesis_block(cluster_setup.genesis);
        for (std::uint32_t i = 0; i < cfg.nodes; ++i) {
            auto rc = consensus::ReplicaConfig::make(cfg.nodes, i, cfg.batch_size,
                                                     cfg.view_timeout_ms);
            replicas.push_back(std::make_unique<consensus::Replica>(
                rc, cluster_setup.node_keys[i], genesis_block));
        }
        live.assign(cfg.nodes, true);

        // Pre-experiment state, applied as replayed blocks: registrar DID,
        // base schema/definition, provider DIDs, initial vehicle pool.
        std::vector<ledger::Transaction> setup_txns;
        const std::int64_t t0 = 0;
        setup_txns.push_back(ledger::make_did_reg(registrar_keys, false, setup_rng, t0));
        auto schema_made = credentials::schema_gen(registrar_keys, registrar_did,
                                                   "vehicle-registration", "1.0",
                                                   {"VIN", "make", "model", "owner"}, setup_rng,
                                                   t0);
        base_schema = schema_made.schema;
        setup_txns.push_back(schema_made.txn);
        auto def_made = credentials::def_gen(registrar_keys, registrar_did, base_schema,
                                             setup_rng, t0);
        base_def = def_made.definition;
        setup_txns.push_back(def_made.txn);
        for (std::uint32_t i = 0; i < cfg.providers; ++i)
            setup_txns.push_back(
                ledger::make_did_reg(crypto::keygen(setup_rng), false, setup_rng, t0));
        for (std::uint32_t i = 0; i < cfg.vehicles; ++i) {
            auto kp = crypto::keygen(setup_rng);
            vehicle_pool.emplace_back(identity::did_from_key(kp.public_key), kp.public_key);
            setup_txns.push_back(ledger::make_did_reg(kp, false, setup_rng, t0));
        }

        ledger::LedgerState state = ledger::genesis_state(genesis_block);
        Digest prev = genesis_block.digest();
        std::size_t at = 0;
        while (at < setup_txns.size()) {
            ledger::Block block;
            block.height = state.height + 1;
            block.prev_hash = prev;
            ledger::LedgerState spec = state;
            for (std::size_t k = 0; k < 50 && at < setup_txns.size(); ++k, ++at) {
                auto r = ledger::try_apply_txn(spec, setup_txns[at], std::nullopt);
                if (!r.ok) throw Error("setup transaction rejected: " + r.reason);
                block.txns.push_back(setup_txns[at]);
            }
            block.state_root = spec.state_root();
            spec.height = block.height;
            spec.last_block_hash = block.digest();
            prev = spec.last_block_hash;
            state = std::move(spec);
            for (auto& r : replicas) r->replay_committed(block);
            global_committed_height = block.height;
        }

        // Ticks, crash schedule, workload.
        for (std::uint32_t i = 0; i < cfg.nodes; ++i)
            push(make_event(replicas[i]->config().tick_ms(), Event::Kind::tick, i));
        for (const auto& cw : cfg.crash_schedule) {
            push(make_event(cw.down_from_s * 1000, Event::Kind::crash, cw.node));
            push(make_event(cw.up_at_s * 1000, Event::Kind::recover, cw.node));
        }
        auto wl_rng = SeededRng(cfg.seed).fork("workload");
        for (const auto& ev : workload(cfg, wl_rng)) {
            Event e = make_event(ev.at_ms, Event::Kind::inject);
            e.txn_class = ev.txn_class;
            push(std::move(e));
        }
    }

    // ---------------------------------------------------------- transport

    void absorb(consensus::NodeId from, consensus::StepResult&& result) {
        for (auto& rej : result.admission_rejected)
            if (tracked.count(rej.txn) && !rejected_reason.count(rej.txn))
                rejected_reason[rej.txn] = rej.reason;

        for (auto& out : result.messages) {
            std::vector<consensus::NodeId> targets;
            if (out.to) {
                targets.push_back(*out.to);
            } else {
                for (std::uint32_t i = 0; i < cfg.nodes; ++i)
                    if (i != from) targets.push_back(i);
            }
            for (auto to : targets) {
                if (rt.chance(cfg.drop_rate)) continue;
                std::int64_t latency =
                    cfg.latency_min_ms +
                    static_cast<std::int64_t>(rt.uniform(
                        static_cast<std::uint64_t>(cfg.latency_max_ms - cfg.latency_min_ms + 1)));
                Event e = make_event(now_ms + latency, Event::Kind::deliver, to);
                e.msg = out.msg;
                push(std::move(e));
            }
        }

        for (auto& cb : result.committed) {
            if (cb.block.height <= global_committed_height) continue;
            global_committed_height = cb.block.height;
            note_committed_block(cb);
        }
    }

    void note_committed_block(const consensus::CommittedBlock& cb) {
        std::set<Digest> rejected_here;
        for (const auto& rej : cb.rejected) {
            rejected_here.insert(rej.txn);
            if (tracked.count(rej.txn) && !rejected_reason.count(rej.txn))
                rejected_reason[rej.txn] = rej.reason;
        }
        for (const auto& txn : cb.block.txns) {
            Digest id = txn.digest();
            if (rejected_here.count(id)) continue;
            if (!committed_at.count(id)) committed_at[id] = now_ms;

            if (txn.kind == ledger::TxnKind::did_reg && tracked.count(id)) {
                auto did = identity::Did::parse(txn.payload.at("did").get<std::string>());
                auto pk = crypto::PublicKey::from_hex_str(
                    txn.payload.at("public_key").get<std::string>());
                vehicle_pool.emplace_back(did, pk);
            }
            if (txn.kind == ledger::TxnKind::schema) {
                auto it = pending_defs.find(id);
                if (it != pending_defs.end()) {
                    Event e = make_event(now_ms + 1, Event::Kind::inject_def);
                    e.def_schema = id;
                    push(std::move(e));
                }
            }
        }
    }

    // ------------------------------------------------------------ inject

    std::optional<consensus::NodeId> pick_live_node() {
        std::vector<consensus::NodeId> alive;
        for (std::uint32_t i = 0; i < cfg.nodes; ++i)
            if (live[i]) alive.push_back(i);
        if (alive.empty()) return std::nullopt;
        return alive[rt.uniform(alive.size())];
    }

    void submit(const ledger::Transaction& txn, TxnClass cls) {
        auto target = pick_live_node();
        if (!target) return;
        tracked[txn.digest()] = {cls, now_ms};
        absorb(*target, replicas[*target]->on_client_txn(txn, now_ms));
    }

    std::string fresh_vin() {
        std::string vin = random_vin(rt);
        while (!used_vins.insert(vin).second) vin = random_vin(rt);
        return vin;
    }

    void inject(TxnClass cls) {
        const std::int64_t now_s = now_ms / 1000;
        switch (cls) {
            case TxnClass::did_reg: {
                auto kp = crypto::keygen(keys);
                submit(ledger::make_did_reg(kp, false, rt, now_s), cls);
                break;
            }
            case TxnClass::schema_def: {
                std::string name = "sim-schema-" + std::to_string(schema_counter++);
                auto made = credentials::schema_gen(registrar_keys, registrar_did, name, "1.0",
                                                    {"VIN", "make", "model", "owner"}, rt, now_s);
                Digest schema_txn_id = made.txn.digest();
                pending_defs[schema_txn_id] = {made.schema, now_ms};
                submit(made.txn, cls);
                break;
            }
            case TxnClass::cred_reg: {
                if (vehicle_pool.empty()) return;
                const auto& [subject, subject_pk] =
                    vehicle_pool[rt.uniform(vehicle_pool.size())];
                std::map<std::string, std::string> attrs{{"VIN", fresh_vin()},
                                                         {"make", "simmake"},
                                                         {"model", "simmodel"},
                                                         {"owner", "simowner"}};
                auto issued = credentials::issue_credential(
                    registrar_keys, registrar_did, base_def, base_schema, subject, subject_pk,
                    attrs, vin_key.view(), rt, now_s);
                submit(issued.txn, cls);
                break;
            }
        }
    }

    void inject_def(const Digest& schema_txn_id) {
        auto it = pending_defs.find(schema_txn_id);
        if (it == pending_defs.end()) return;
        auto made =
            credentials::def_gen(registrar_keys, registrar_did, it->second.first, rt, now_ms / 1000);
        pending_defs.erase(it);
        submit(made.txn, TxnClass::schema_def);
    }

    // -------------------------------------------------------------- loop

    void run_loop() {
        while (!queue.empty()) {
            Event e = queue.top();
            queue.pop();
            if (e.at_ms > end_ms()) continue;  // drop events past the horizon
            now_ms = std::max(now_ms, e.at_ms);

            switch (e.kind) {
                case Event::Kind::deliver:
                    if (live[e.node])
                        absorb(e.node, replicas[e.node]->on_message(e.msg, now_ms));
                    break;
                case Event::Kind::tick: {
                    if (live[e.node]) absorb(e.node, replicas[e.node]->on_tick(now_ms));
                    Event next =
                        make_event(now_ms + replicas[e.node]->config().tick_ms(),
                                   Event::Kind::tick, e.node);
                    if (next.at_ms <= end_ms()) push(std::move(next));
                    break;
                }
                case Event::Kind::crash:
                    live[e.node] = false;
                    break;
                case Event::Kind::recover:
                    live[e.node] = true;
                    break;
                case Event::Kind::inject:
                    inject(e.txn_class);
                    break;
                case Event::Kind::inject_def:
                    inject_def(e.def_schema);
                    break;
            }
        }
    }

    // ----------------------------------------------------------- results

    SimResult finish() {
        SimResult res;
        res.injected = tracked.size();

        std::map<std::pair<std::int64_t, int>, std::vector<double>> latencies;
        std::map<std::pair<std::int64_t, int>, std::uint64_t> counts;
        for (const auto& [id, info] : tracked) {
            auto c = committed_at.find(id);
            if (c != committed_at.end()) {
                res.committed += 1;
                std::int64_t bucket =
                    (c->second / 1000) / cfg.metrics_bucket_s * cfg.metrics_bucket_s;
                auto key = std::make_pair(bucket, static_cast<int>(info.txn_class));
                counts[key] += 1;
                latencies[key].push_back(static_cast<double>(c->second - info.injected_ms));
            } else if (rejected_reason.count(id)) {
                res.rejected += 1;
                res.rejections.emplace_back(id, rejected_reason[id]);
            } else {
                res.in_flight_at_end += 1;
            }
        }

        auto percentile = [](std::vector<double>& v, double p) {
            if (v.empty()) return 0.0;
            std::sort(v.begin(), v.end());
            std::size_t idx = static_cast<std::size_t>(p * static_cast<double>(v.size() - 1));
            return v[idx];
        };

        for (std::int64_t bucket = 0; bucket < cfg.duration_s;
             bucket += cfg.metrics_bucket_s) {
            std::uint32_t live_nodes = 0;
            for (std::uint32_t i = 0; i < cfg.nodes; ++i)
                if (node_live_at(i, bucket)) live_nodes += 1;
            for (const auto cls : kClasses) {
                auto key = std::make_pair(bucket, static_cast<int>(cls));
                MetricsSample s;
                s.bucket_start_s = bucket;
                s.txn_class = cls;
                s.committed_count = counts.count(key) ? counts[key] : 0;
                if (latencies.count(key)) {
                    s.latency_ms_p50 = percentile(latencies[key], 0.5);
                    s.latency_ms_p95 = percentile(latencies[key], 0.95);
                }
                s.live_nodes = live_nodes;
                res.metrics.push_back(s);
            }
        }

        res.min_height = UINT64_MAX;
        for (const auto& r : replicas) {
            std::vector<Digest> digests;
            for (const auto& b : r->chain()) digests.push_back(b.digest());
            res.min_height = std::min(res.min_height, r->committed_height());
            res.max_height = std::max(res.max_height, r->committed_height());
            res.chains.push_back(std::move(digests));
        }
        for (std::size_t h = 0; h <= res.min_height && res.safety_ok; ++h)
            for (std::size_t i = 1; i < res.chains.size(); ++i)
                if (res.chains[i][h] != res.chains[0][h]) {
                    res.safety_ok = false;
                    break;
                }
        return res;
    }
};

}  // namespace

std::uint64_t SimResult::committed_in_window(std::int64_t from_s, std::int64_t to_s) const {
    std::uint64_t total = 0;
    for (const auto& r : metrics)
        if (r.bucket_start_s >= from_s && r.bucket_start_s < to_s) total += r.committed_count;
    return total;
}

SimResult run(const SimConfig& config) {
    config.validate();
    Engine engine(config);
    engine.setup();
    engine.run_loop();
    return engine.finish();
}

void export_csv(const std::vector<MetricsSample>& metrics, std::ostream& out) {
    out << "bucket_start_s,txn_class,committed_count,latency_ms_p50,latency_ms_p95,live_nodes\n";
    char line[160];
    for (const auto& m : metrics) {
        std::snprintf(line, sizeof(line), "%lld,%s,%llu,%.3f,%.3f,%u\n",
                      static_cast<long long>(m.bucket_start_s), to_string(m.txn_class),
                      static_cast<unsigned long long>(m.committed_count), m.latency_ms_p50,
                      m.latency_ms_p95, m.live_nodes);
        out << line;
    }
}

void export_csv(const std::vector<MetricsSample>& metrics, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open metrics file: " + path.string());
    export_csv(metrics, f);
    if (!f) throw IoError("failed writing metrics file: " + path.string());
}

}  // namespace vdkms::simnet
