#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>

#include "vdkms/consensus.hpp"
#include "vdkms/rng.hpp"

namespace vdkms::simnet {

/// The experiment's three transaction classes: identity registrations,
/// schema+definition publications, and credential registrations.
enum class TxnClass { did_reg, schema_def, cred_reg };

const char* to_string(TxnClass c);

struct CrashWindow {
    consensus::NodeId node = 0;
    std::int64_t down_from_s = 0;
    std::int64_t up_at_s = 0;
};

struct SimConfig {
    std::uint64_t seed = 1;
    std::int64_t duration_s = 60;
    std::uint32_t nodes = 4;
    std::size_t batch_size = 10;
    std::int64_t view_timeout_ms = 2000;
    std::uint32_t vehicles = 20;
    std::uint32_t providers = 2;
    std::uint32_t registrars = 1;
    std::array<double, 3> txn_mix{0.4, 0.2, 0.4};  // did_reg, schema_def, cred_reg
    double txn_rate_per_s = 5.0;
    std::int64_t latency_min_ms = 5;
    std::int64_t latency_max_ms = 50;
    double drop_rate = 0.0;
    std::vector<CrashWindow> crash_schedule;
    std::int64_t metrics_bucket_s = 10;

    void validate() const;
    Json to_json() const;
    static SimConfig from_json(const Json& j);
};

/// Scaled stand-in for the seven-node interruption run: 600 simulated
/// seconds, crash window over the same relative 40%-60% span.
SimConfig paper_interruption_scenario(std::uint32_t nodes, std::uint32_t crash_count,
                                      std::uint64_t seed);

struct MetricsSample {
    std::int64_t bucket_start_s = 0;
    TxnClass txn_class = TxnClass::did_reg;
    std::uint64_t committed_count = 0;
    double latency_ms_p50 = 0.0;
    double latency_ms_p95 = 0.0;
    std::uint32_t live_nodes = 0;
};

struct InjectEvent {
    std::int64_t at_ms = 0;
    TxnClass txn_class = TxnClass::did_reg;
};

/// Poisson arrival stream over the run, classes drawn from the mix.
std::vector<InjectEvent> workload(const SimConfig& config, Rng& rng);

struct SimResult {
    std::vector<MetricsSample> metrics;
    std::vector<std::vector<Digest>> chains;  // per replica, block digests
    std::uint64_t injected = 0;
    std::uint64_t committed = 0;
    std::uint64_t rejected = 0;
    std::uint64_t in_flight_at_end = 0;
    std::vector<std::pair<Digest, std::string>> rejections;
    bool safety_ok = true;            // all chains byte-agree on the common prefix
    std::uint64_t min_height = 0;     // shortest replica chain
    std::uint64_t max_height = 0;

    /// Total committed transactions across buckets starting in [from_s, to_s).
    std::uint64_t committed_in_window(std::int64_t from_s, std::int64_t to_s) const;
};

SimResult run(const SimConfig& config);

/// Exactly: bucket_start_s, txn_class, committed_count, latency_ms_p50,
/// latency_ms_p95, live_nodes; one row per (bucket, class).
void export_csv(const std::vector<MetricsSample>& metrics, std::ostream& out);
void export_csv(const std::vector<MetricsSample>& metrics, const std::filesystem::path& path);

}  // namespace vdkms::simnet
