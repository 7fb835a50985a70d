#include "truffle/sim/cluster.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <random>
#include <set>

#include <json.hpp>

#include "truffle/ids.hpp"
#include "truffle/sim/adapters.hpp"
#include "truffle/wire.hpp"

namespace truffle::sim {

namespace {

Result<BackendLatencyProfile> profile_from_json(const nlohmann::json& doc,
                                                BackendLatencyProfile fallback,
                                                const char* label) {
    if (!doc.is_object()) {
        return {Errc::config_error, std::string(label) + " must be an object"};
    }
    BackendLatencyProfile profile = fallback;
    if (doc.contains("base_ms")) {
        if (!doc["base_ms"].is_number()) {
            return {Errc::config_error, std::string(label) + ".base_ms must be a number"};
        }
        profile.base_ms = doc["base_ms"].get<double>();
    }
    if (doc.contains("per_mb_ms")) {
        if (!doc["per_mb_ms"].is_number()) {
            return {Errc::config_error,
                    std::string(label) + ".per_mb_ms must be a number"};
        }
        profile.per_mb_ms = doc["per_mb_ms"].get<double>();
    }
    return profile;
}

Result<std::int64_t> ms_field(const nlohmann::json& doc, const char* key,
                              std::int64_t fallback) {
    if (!doc.contains(key)) {
        return fallback;
    }
    if (!doc[key].is_number()) {
        return {Errc::config_error, std::string(key) + " must be a number"};
    }
    return doc[key].get<std::int64_t>();
}

}  // namespace

Result<Topology> parse_topology(std::string_view text) {
    if (text == "chain") return Topology::chain;
    if (text == "fan_out_fan_in") return Topology::fan_out_fan_in;
    return {Errc::config_error, "unknown topology: " + std::string(text)};
}

Result<ClusterConfig> ClusterConfig::parse(const std::string& json_text) {
    const auto doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        return {Errc::config_error, "cluster config is not a JSON object"};
    }

    ClusterConfig config;
    if (doc.contains("nodes")) {
        if (!doc["nodes"].is_number_integer()) {
            return {Errc::config_error, "nodes must be an integer"};
        }
        config.nodes = doc["nodes"].get<int>();
    }
    if (doc.contains("scale_factor")) {
        if (!doc["scale_factor"].is_number()) {
            return {Errc::config_error, "scale_factor must be a number"};
        }
        config.scale_factor = doc["scale_factor"].get<double>();
    }
    if (auto ms = ms_field(doc, "scheduling_ms", config.scheduling_ms); ms.ok()) {
        config.scheduling_ms = ms.value();
    } else {
        return ms.error();
    }
    if (doc.contains("storage_kind")) {
        auto kind = parse_storage_kind(doc["storage_kind"].get<std::string>());
        if (!kind.ok()) {
            return {Errc::config_error, kind.error().detail};
        }
        config.storage_kind = kind.value();
    }
    if (doc.contains("topology")) {
        auto topology = parse_topology(doc["topology"].get<std::string>());
        if (!topology.ok()) {
            return topology.error();
        }
        config.topology = topology.value();
    }
    if (doc.contains("backends")) {
        const auto& backends = doc["backends"];
        if (!backends.is_object()) {
            return {Errc::config_error, "backends must be an object"};
        }
        struct Binding {
            const char* key;
            BackendLatencyProfile* slot;
        };
        const Binding bindings[] = {
            {"direct", &config.direct_profile},
            {"kvs", &config.kvs_profile},
            {"object_store", &config.object_store_profile},
        };
        for (const auto& binding : bindings) {
            if (!backends.contains(binding.key)) {
                continue;
            }
            auto profile =
                profile_from_json(backends[binding.key], *binding.slot, binding.key);
            if (!profile.ok()) {
                return profile.error();
            }
            *binding.slot = profile.value();
        }
    }
    if (!doc.contains("functions") || !doc["functions"].is_array()) {
        return {Errc::config_error, "functions must be an array"};
    }
    for (const auto& fn : doc["functions"]) {
        if (!fn.is_object() || !fn.contains("name")) {
            return {Errc::config_error, "every function needs a name"};
        }
        FunctionSpec spec;
        spec.name = fn["name"].get<std::string>();
        if (auto ms = ms_field(fn, "cold_start_ms", 0); ms.ok()) {
            spec.cold_start_ms = ms.value();
        } else {
            return ms.error();
        }
        if (auto ms = ms_field(fn, "added_delay_ms", 0); ms.ok()) {
            spec.added_delay_ms = ms.value();
        } else {
            return ms.error();
        }
        if (auto ms = ms_field(fn, "compute_ms", 0); ms.ok()) {
            spec.compute_ms = ms.value();
        } else {
            return ms.error();
        }
        if (fn.contains("placement")) {
            spec.placement = fn["placement"].get<std::string>();
        }
        if (fn.contains("downstream")) {
            if (!fn["downstream"].is_array()) {
                return {Errc::config_error, spec.name + ".downstream must be an array"};
            }
            for (const auto& target : fn["downstream"]) {
                spec.downstream.push_back(target.get<std::string>());
            }
        }
        config.functions.push_back(std::move(spec));
    }

    if (auto valid = config.validate(); !valid.ok()) {
        return valid.error();
    }
    return config;
}

Result<void> ClusterConfig::validate() const {
    if (nodes < 1) {
        return {Errc::config_error, "at least one node required"};
    }
    if (scale_factor <= 0.0) {
        return {Errc::config_error, "scale_factor must be positive"};
    }
    if (scheduling_ms < 0) {
        return {Errc::config_error, "scheduling_ms must be >= 0"};
    }
    for (const auto* profile :
         {&direct_profile, &kvs_profile, &object_store_profile}) {
        if (auto valid = profile->validate(); !valid.ok()) {
            return valid;
        }
    }
    if (functions.empty()) {
        return {Errc::config_error, "no functions configured"};
    }

    std::set<std::string> names;
    std::set<std::string> valid_nodes;
    for (int i = 0; i < nodes; ++i) {
        valid_nodes.insert("node" + std::to_string(i));
    }
    for (const auto& fn : functions) {
        if (fn.name.empty()) {
            return {Errc::config_error, "function names must be non-empty"};
        }
        if (!names.insert(fn.name).second) {
            return {Errc::config_error, "duplicate function name: " + fn.name};
        }
        if (fn.cold_start_ms < 0 || fn.added_delay_ms < 0 || fn.compute_ms < 0) {
            return {Errc::config_error, fn.name + ": durations must be >= 0"};
        }
        if (!fn.placement.empty() && valid_nodes.count(fn.placement) == 0) {
            return {Errc::config_error,
                    fn.name + ": placement " + fn.placement + " is not one of the " +
                        std::to_string(nodes) + " node(s)"};
        }
    }

    // Edge resolution + in-degrees.
    std::map<std::string, int> in_degree;
    for (const auto& fn : functions) {
        for (const auto& target : fn.downstream) {
            if (names.count(target) == 0) {
                return {Errc::config_error,
                        fn.name + ": downstream " + target + " does not exist"};
            }
            if (target == fn.name) {
                return {Errc::config_error, fn.name + " invokes itself"};
            }
            ++in_degree[target];
        }
    }
    std::vector<const FunctionSpec*> entries;
    for (const auto& fn : functions) {
        if (in_degree[fn.name] == 0) {
            entries.push_back(&fn);
        }
    }
    if (entries.size() != 1) {
        return {Errc::config_error,
                "workflow needs exactly one entry function, found " +
                    std::to_string(entries.size())};
    }

    if (topology == Topology::chain) {
        for (const auto& fn : functions) {
            if (fn.downstream.size() > 1) {
                return {Errc::config_error,
                        "chain topology: " + fn.name + " has multiple downstream edges"};
            }
            if (in_degree[fn.name] > 1) {
                return {Errc::config_error,
                        "chain topology: " + fn.name + " has multiple upstream edges"};
            }
        }
        // Single entry + unique in/out edges: walking from the entry must
        // visit every function exactly once.
        std::size_t visited = 0;
        const FunctionSpec* cursor = entries.front();
        std::set<std::string> seen;
        while (cursor != nullptr) {
            if (!seen.insert(cursor->name).second) {
                return {Errc::config_error, "chain topology contains a cycle"};
            }
            ++visited;
            if (cursor->downstream.empty()) {
                break;
            }
            const auto& next = cursor->downstream.front();
            cursor = nullptr;
            for (const auto& fn : functions) {
                if (fn.name == next) {
                    cursor = &fn;
                    break;
                }
            }
        }
        if (visited != functions.size()) {
            return {Errc::config_error, "chain topology must link every function"};
        }
    } else {
        // DAG check (DFS from the entry), plus the single-sink rule.
        int sinks = 0;
        for (const auto& fn : functions) {
            if (fn.downstream.empty()) {
                ++sinks;
            }
        }
        if (sinks != 1) {
            return {Errc::config_error,
                    "fan_out_fan_in needs exactly one sink, found " +
                        std::to_string(sinks)};
        }
        std::map<std::string, const FunctionSpec*> by_name;
        for (const auto& fn : functions) {
            by_name[fn.name] = &fn;
        }
        std::set<std::string> done;
        std::set<std::string> path;
        std::function<Result<void>(const FunctionSpec*)> visit =
            [&](const FunctionSpec* fn) -> Result<void> {
            if (path.count(fn->name) > 0) {
                return {Errc::config_error, "workflow contains a cycle at " + fn->name};
            }
            if (done.count(fn->name) > 0) {
                return {};
            }
            path.insert(fn->name);
            for (const auto& target : fn->downstream) {
                if (auto r = visit(by_name.at(target)); !r.ok()) {
                    return r;
                }
            }
            path.erase(fn->name);
            done.insert(fn->name);
            return {};
        };
        if (auto r = visit(entries.front()); !r.ok()) {
            return r;
        }
        if (done.size() != functions.size()) {
            return {Errc::config_error,
                    "every function must be reachable from the entry"};
        }
    }
    return {};
}

const FunctionSpec* ClusterConfig::entry() const {
    std::set<std::string> referenced;
    for (const auto& fn : functions) {
        for (const auto& target : fn.downstream) {
            referenced.insert(target);
        }
    }
    for (const auto& fn : functions) {
        if (referenced.count(fn.name) == 0) {
            return &fn;
        }
    }
    return nullptr;
}

const BackendLatencyProfile& ClusterConfig::profile_for(StorageKind kind) const {
    switch (kind) {
    case StorageKind::kvs:          return kvs_profile;
    case StorageKind::object_store: return object_store_profile;
    case StorageKind::direct:       break;
    }
    return direct_profile;
}

Cluster::Cluster(ClusterConfig config)
    : config_(std::move(config)),
      clock_(config_.scale_factor),
      kvs_(config_.kvs_profile, clock_),
      object_store_(config_.object_store_profile, clock_) {}

Result<std::unique_ptr<Cluster>> Cluster::deploy(ClusterConfig config) {
    if (auto valid = config.validate(); !valid.ok()) {
        return valid.error();
    }
    std::unique_ptr<Cluster> cluster(new Cluster(std::move(config)));
    if (auto started = cluster->start(); !started.ok()) {
        return started.error();
    }
    return cluster;
}

Result<void> Cluster::start() {
    SimPlatform::Runtime runtime;
    runtime.clock = clock_;
    runtime.watcher = &watcher_;
    runtime.sink = &builder_;
    runtime.kvs = &kvs_;
    runtime.object_store = &object_store_;
    runtime.direct_profile = config_.direct_profile;
    runtime.edge_kind = config_.storage_kind;
    runtime.scheduling_ms = config_.scheduling_ms;
    platform_ = std::make_unique<SimPlatform>(runtime);
    if (auto started = platform_->start(); !started.ok()) {
        return started;
    }

    const auto direct_profile = config_.direct_profile;
    const auto clock = clock_;
    for (int i = 0; i < config_.nodes; ++i) {
        Ingress::Config sidecar;
        sidecar.listen_addr = "127.0.0.1:0";
        sidecar.platform_addr = platform_->addr();
        sidecar.direct_transfer_charge = [clock, direct_profile](std::uint64_t bytes) {
            clock.sleep_nominal(direct_profile.nominal_ms(bytes));
        };
        auto node = std::make_unique<Node>(
            "node" + std::to_string(i),
            make_service_engine(&kvs_, &object_store_, nullptr), std::move(sidecar),
            watcher_, &builder_);
        if (auto started = node->ingress.start(); !started.ok()) {
            return started;
        }
        nodes_.push_back(std::move(node));
    }

    for (const auto& spec : config_.functions) {
        Node* placed = spec.placement.empty() ? nodes_.front().get()
                                              : node(spec.placement);
        platform_->register_function(spec, placed);
    }
    return {};
}

Cluster::~Cluster() {
    stop();
}

void Cluster::stop() {
    if (stopped_) {
        return;
    }
    stopped_ = true;
    if (platform_ != nullptr) {
        platform_->stop();
    }
    for (auto& node : nodes_) {
        node->ingress.stop();
    }
}

Node* Cluster::node(const std::string& name) {
    for (auto& candidate : nodes_) {
        if (candidate->name == name) {
            return candidate.get();
        }
    }
    return nullptr;
}

Node* Cluster::source_node(const std::string& entry_placement) {
    for (auto& candidate : nodes_) {
        if (candidate->name != entry_placement) {
            return candidate.get();
        }
    }
    return nodes_.front().get();
}

const Payload& Cluster::experiment_payload(std::uint64_t size_mb) {
    std::lock_guard lock(payload_mu_);
    auto it = payload_cache_.find(size_mb);
    if (it != payload_cache_.end()) {
        return it->second;
    }

    // One RNG-filled MiB, tiled, with each tile stamped unique: content
    // varies per size and per block but costs far less than a full random
    // fill at 128 MiB.
    constexpr std::size_t kBlock = 1024 * 1024;
    const std::size_t total = static_cast<std::size_t>(size_mb) * kBlock;
    Payload blob(total, '\0');
    if (total > 0) {
        std::mt19937_64 rng(0x7275666c65ull ^ (size_mb * 0x9e3779b97f4a7c15ull));
        const std::size_t head = std::min(kBlock, total);
        std::size_t i = 0;
        for (; i + sizeof(std::uint64_t) <= head; i += sizeof(std::uint64_t)) {
            const std::uint64_t word = rng();
            std::memcpy(&blob[i], &word, sizeof(word));
        }
        for (; i < head; ++i) {
            blob[i] = static_cast<char>(rng() & 0xff);
        }
        for (std::size_t offset = kBlock; offset < total; offset += kBlock) {
            const std::size_t chunk = std::min(kBlock, total - offset);
            std::memcpy(&blob[offset], blob.data(), chunk);
            if (chunk >= sizeof(std::uint64_t)) {
                const std::uint64_t tag = offset / kBlock;
                std::memcpy(&blob[offset], &tag, sizeof(tag));
            }
        }
    }
    return payload_cache_.emplace(size_mb, std::move(blob)).first->second;
}

StorageDescriptor Cluster::input_descriptor(std::uint64_t size_mb) const {
    StorageDescriptor descriptor;
    descriptor.kind = config_.storage_kind;
    switch (config_.storage_kind) {
    case StorageKind::direct:
        break;
    case StorageKind::kvs:
        descriptor.locator = "input/" + std::to_string(size_mb) + "mb";
        break;
    case StorageKind::object_store:
        descriptor.locator = "inputs/" + std::to_string(size_mb) + "mb";
        break;
    }
    return descriptor;
}

void Cluster::ensure_input_prepared(std::uint64_t size_mb) {
    const Payload& blob = experiment_payload(size_mb);
    std::lock_guard lock(payload_mu_);
    if (!prepared_inputs_.insert(size_mb).second) {
        return;
    }
    // The upload pays the backend's charge once, outside any measurement.
    switch (config_.storage_kind) {
    case StorageKind::direct:
        break;
    case StorageKind::kvs:
        (void)kvs_.put("input/" + std::to_string(size_mb) + "mb", blob);
        break;
    case StorageKind::object_store:
        (void)object_store_.put("inputs", std::to_string(size_mb) + "mb", blob);
        break;
    }
}

MeasurementRecord Cluster::invoke_workflow(std::uint64_t input_size_mb, Mode mode) {
    const FunctionSpec* entry = config_.entry();
    const std::string trace_id = make_reference_key();
    if (config_.storage_kind != StorageKind::direct) {
        ensure_input_prepared(input_size_mb);
    }

    InvokeResponse response;
    if (mode == Mode::truffle) {
        RequestEnvelope envelope;
        envelope.target_function = entry->name;
        envelope.trace_id = trace_id;
        envelope.storage = input_descriptor(input_size_mb);
        if (config_.storage_kind == StorageKind::direct) {
            envelope.inline_payload = experiment_payload(input_size_mb);
        }
        response = source_node(entry->placement)
                       ->ingress.handle_invoke(std::move(envelope));
    } else {
        SimPlatform::Request request;
        request.target = entry->name;
        request.trace_id = trace_id;
        if (config_.storage_kind == StorageKind::direct) {
            request.inline_payload = experiment_payload(input_size_mb);
        } else {
            request.storage = input_descriptor(input_size_mb);
        }
        response = platform_->invoke(std::move(request));
    }

    auto record = builder_.build(trace_id, mode);
    record.failed = response.status != 200;
    if (record.failed) {
        if (auto err = wire::parse_error_body(response.body); err.has_value()) {
            record.failure_detail =
                std::string(to_string(err->code)) + ": " + err->detail;
        } else {
            record.failure_detail = "status " + std::to_string(response.status);
        }
    }
    return record;
}

void Cluster::warm(const std::string& function_name) {
    platform_->warm(function_name);
}

}  // namespace truffle::sim
