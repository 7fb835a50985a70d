#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "truffle/buffer.hpp"
#include "truffle/data_engine.hpp"
#include "truffle/ingress.hpp"
#include "truffle/result.hpp"
#include "truffle/sim/backend.hpp"
#include "truffle/sim/clock.hpp"
#include "truffle/sim/record.hpp"
#include "truffle/storage.hpp"
#include "truffle/watcher.hpp"

namespace truffle::sim {

/// One deployable function: its lifecycle costs and its workflow edges.
struct FunctionSpec {
    std::string name;
    std::int64_t cold_start_ms = 0;    ///< infrastructure + runtime startup
    std::int64_t added_delay_ms = 0;   ///< sweep knob stacked onto cold start
    std::int64_t compute_ms = 0;       ///< execution time after input arrives
    std::string placement;             ///< node name, e.g. "node1"
    std::vector<std::string> downstream;
};

enum class Topology { chain, fan_out_fan_in };

constexpr std::string_view to_string(Topology topology) {
    return topology == Topology::chain ? "chain" : "fan_out_fan_in";
}
Result<Topology> parse_topology(std::string_view text);

/// Everything a simulated cluster is made of.  Parsed from a JSON document
/// with keys: nodes, scale_factor, scheduling_ms, storage_kind, topology,
/// functions[].{name,cold_start_ms,added_delay_ms,compute_ms,placement,
/// downstream}, backends.{direct,kvs,object_store}.{base_ms,per_mb_ms}.
struct ClusterConfig {
    int nodes = 1;
    double scale_factor = 1.0;
    std::int64_t scheduling_ms = 20;  ///< platform scheduling latency
    StorageKind storage_kind = StorageKind::direct;  ///< input + edge binding
    Topology topology = Topology::chain;
    BackendLatencyProfile direct_profile = kDirectProfile;
    BackendLatencyProfile kvs_profile = kKvsProfile;
    BackendLatencyProfile object_store_profile = kObjectStoreProfile;
    std::vector<FunctionSpec> functions;

    static Result<ClusterConfig> parse(const std::string& json_text);

    /// Shape rules: positive node count and scale, nonnegative durations,
    /// unique function names, placements naming real nodes, downstream names
    /// resolving, and the topology's own structure (chain: one linear path;
    /// fan_out_fan_in: a DAG with a single entry and a single sink).
    Result<void> validate() const;

    /// The unique function no edge points at.  Call after validate().
    const FunctionSpec* entry() const;

    const BackendLatencyProfile& profile_for(StorageKind kind) const;
};

/// One simulated worker node: a buffer, a storage engine wired to the
/// cluster's backends, and the node-local sidecar.
struct Node {
    std::string name;
    Buffer buffer;
    DataEngine engine;
    Ingress ingress;

    Node(std::string node_name, DataEngine node_engine, Ingress::Config config,
         Watcher& watcher, TraceSink* sink)
        : name(std::move(node_name)),
          engine(std::move(node_engine)),
          ingress(std::move(config), buffer, watcher, engine, sink) {}
};

/// Scheduler + function runtime: sleeps the scheduling and cold-start
/// curves, emits lifecycle events, runs the toy function bodies, and routes
/// downstream invocations through the local sidecar (or straight back here
/// for baseline runs).  Also serves POST /invoke for wire clients.
class SimPlatform {
public:
    /// Simulation plumbing shared with the owning cluster.
    struct Runtime {
        SimClock clock;
        Watcher* watcher = nullptr;
        RecordBuilder* sink = nullptr;
        InMemoryKvs* kvs = nullptr;
        InMemoryObjectStore* object_store = nullptr;
        BackendLatencyProfile direct_profile = kDirectProfile;
        StorageKind edge_kind = StorageKind::direct;
        std::int64_t scheduling_ms = 20;
    };

    /// A normalized invocation, whichever door it came through.
    struct Request {
        std::string target;
        std::string trace_id;
        std::string reference_key;  ///< non-empty = redeem from the node buffer
        std::optional<Payload> inline_payload;
        std::optional<StorageDescriptor> storage;
    };

    explicit SimPlatform(Runtime runtime);
    ~SimPlatform();

    SimPlatform(const SimPlatform&) = delete;
    SimPlatform& operator=(const SimPlatform&) = delete;

    void register_function(const FunctionSpec& spec, Node* node);

    /// Marks the function's instance as already running: invocations skip
    /// scheduling and cold start, and the instance never scales back down.
    void warm(const std::string& function_name);

    /// Full lifecycle of one invocation; blocks until the function (and its
    /// downstream subtree) answered.
    InvokeResponse invoke(Request request);

    Result<void> start();
    void stop();
    int port() const;
    std::string addr() const;

private:
    struct Deployed {
        FunctionSpec spec;
        Node* node = nullptr;
    };
    struct Impl;

    Result<Payload> read_input(Request& request, const Deployed& deployed);
    InvokeResponse relay_downstream(const Deployed& deployed, bool via_truffle,
                                    Payload output, const std::string& trace_id,
                                    const std::string& invocation_id);

    Runtime runtime_;
    mutable std::mutex mu_;
    std::map<std::string, Deployed> functions_;
    std::set<std::string> warm_;
    std::unique_ptr<Impl> impl_;
};

/// A deployed simulated cluster: nodes with sidecars, shared in-memory
/// backends, the platform, and a record builder collecting every trace.
class Cluster {
public:
    static Result<std::unique_ptr<Cluster>> deploy(ClusterConfig config);
    ~Cluster();

    Cluster(const Cluster&) = delete;
    Cluster& operator=(const Cluster&) = delete;

    /// Drives one workflow run end to end and returns its measurement.
    /// Baseline mode calls the platform directly and functions fetch input
    /// after they start; truffle mode goes through a source-node sidecar.
    MeasurementRecord invoke_workflow(std::uint64_t input_size_mb, Mode mode);

    /// Pre-starts a function instance so invocations hit the hot path.
    void warm(const std::string& function_name);

    const ClusterConfig& config() const { return config_; }
    SimPlatform& platform() { return *platform_; }
    Watcher& watcher() { return watcher_; }
    RecordBuilder& sink() { return builder_; }
    InMemoryKvs& kvs() { return kvs_; }
    InMemoryObjectStore& object_store() { return object_store_; }
    Node* node(const std::string& name);

    /// The deterministic input blob used for a given size; cached.
    const Payload& experiment_payload(std::uint64_t size_mb);

    void stop();

private:
    explicit Cluster(ClusterConfig config);

    Result<void> start();
    /// For kvs/object_store inputs: upload the blob once per size so every
    /// mode and repetition reads the same stored object.
    void ensure_input_prepared(std::uint64_t size_mb);
    StorageDescriptor input_descriptor(std::uint64_t size_mb) const;
    /// A node that does not host the entry function, so the pass crosses
    /// nodes (falls back to the entry's own node on single-node clusters).
    Node* source_node(const std::string& entry_placement);

    ClusterConfig config_;
    SimClock clock_;
    Watcher watcher_;
    RecordBuilder builder_;
    InMemoryKvs kvs_;
    InMemoryObjectStore object_store_;
    std::unique_ptr<SimPlatform> platform_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::mutex payload_mu_;
    std::map<std::uint64_t, Payload> payload_cache_;
    std::set<std::uint64_t> prepared_inputs_;
    bool stopped_ = false;
};

}  // namespace truffle::sim
