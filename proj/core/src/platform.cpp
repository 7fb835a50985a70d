#include <atomic>
#include <future>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>

#include "truffle/ids.hpp"
#include "truffle/sim/cluster.hpp"
#include "truffle/sim/digest.hpp"
#include "truffle/wire.hpp"

namespace truffle::sim {

namespace {

// Deep chains and fan-outs hold a platform worker per in-flight stage, so
// the pool must comfortably exceed any workflow's concurrent depth.
constexpr int kPlatformWorkers = 32;

}  // namespace

struct SimPlatform::Impl {
    httplib::Server server;
    std::thread listener;
    std::atomic<int> port{0};

    Impl() {
        server.new_task_queue = [] { return new httplib::ThreadPool(kPlatformWorkers); };
    }
};

SimPlatform::SimPlatform(Runtime runtime)
    : runtime_(std::move(runtime)), impl_(std::make_unique<Impl>()) {
    impl_->server.Post("/invoke", [this](const httplib::Request& req,
                                         httplib::Response& res) {
        Request normalized;
        normalized.target = req.get_header_value(wire::kHdrTarget);
        normalized.trace_id = req.get_header_value(wire::kHdrTrace);
        normalized.reference_key = req.get_header_value(wire::kHdrKey);

        std::string kind_text = "direct";
        if (req.has_header(wire::kHdrStorageKind)) {
            kind_text = req.get_header_value(wire::kHdrStorageKind);
        }
        auto kind = parse_storage_kind(kind_text);
        if (!kind.ok()) {
            res.status = wire::status_for(kind.code());
            res.set_content(wire::error_body(kind.error()), "application/json");
            return;
        }
        if (kind.value() != StorageKind::direct) {
            StorageDescriptor descriptor;
            descriptor.kind = kind.value();
            descriptor.locator = req.get_header_value(wire::kHdrLocator);
            descriptor.endpoint = req.get_header_value(wire::kHdrEndpoint);
            descriptor.credentials_ref = req.get_header_value(wire::kHdrCredentialsRef);
            normalized.storage = std::move(descriptor);
        } else if (normalized.reference_key.empty()) {
            normalized.inline_payload = req.body;
        }

        auto out = invoke(std::move(normalized));
        res.status = out.status;
        res.set_content(std::move(out.body), out.content_type);
    });
}

SimPlatform::~SimPlatform() {
    stop();
}

void SimPlatform::register_function(const FunctionSpec& spec, Node* node) {
    std::lock_guard lock(mu_);
    functions_[spec.name] = Deployed{spec, node};
}

void SimPlatform::warm(const std::string& function_name) {
    Deployed deployed;
    {
        std::lock_guard lock(mu_);
        auto it = functions_.find(function_name);
        if (it == functions_.end()) {
            return;
        }
        deployed = it->second;
        warm_.insert(function_name);
    }
    runtime_.watcher->ingest_event({function_name, deployed.node->ingress.self_host(),
                                    EventKind::running,
                                    std::chrono::steady_clock::now()});
}

Result<Payload> SimPlatform::read_input(Request& request, const Deployed& deployed) {
    if (!request.reference_key.empty()) {
        // The sidecar staged (or is still receiving) the input locally.
        return deployed.node->ingress.serve_buffer_read(request.reference_key);
    }
    if (request.inline_payload.has_value()) {
        // The bytes rode along with the invocation; moving them to the
        // function's node costs the direct-transfer curve, paid only now
        // that the function is up.
        runtime_.clock.sleep_nominal(
            runtime_.direct_profile.nominal_ms(request.inline_payload->size()));
        return std::move(request.inline_payload).value();
    }
    if (request.storage.has_value()) {
        // State of the art: the function fetches its own input after start.
        auto adapter = deployed.node->engine.resolve_adapter(*request.storage);
        if (!adapter.ok()) {
            return adapter.error();
        }
        return adapter.value()->fetch(*request.storage, std::nullopt);
    }
    return Error{Errc::invalid_argument, "invocation carries no input source"};
}

InvokeResponse SimPlatform::relay_downstream(const Deployed& deployed,
                                             bool via_truffle, Payload output,
                                             const std::string& trace_id,
                                             const std::string& invocation_id) {
    const auto& targets = deployed.spec.downstream;

    // Stage the output once per edge.  Storage-bound edges upload first (the
    // producer pays the PUT); direct edges ship the bytes inline.
    std::vector<std::optional<Payload>> inline_payloads(targets.size());
    std::vector<StorageDescriptor> descriptors(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        Payload edge_payload =
            (i + 1 == targets.size()) ? std::move(output) : output;
        switch (runtime_.edge_kind) {
        case StorageKind::direct:
            descriptors[i].kind = StorageKind::direct;
            inline_payloads[i] = std::move(edge_payload);
            break;
        case StorageKind::kvs: {
            const std::string key = "edge/" + invocation_id + "/" + targets[i];
            if (auto put = runtime_.kvs->put(key, std::move(edge_payload));
                !put.ok()) {
                return InvokeResponse::failure(put.error());
            }
            descriptors[i].kind = StorageKind::kvs;
            descriptors[i].locator = key;
            break;
        }
        case StorageKind::object_store: {
            const std::string object = invocation_id + "/" + targets[i];
            if (auto put = runtime_.object_store->put("edges", object,
                                                      std::move(edge_payload));
                !put.ok()) {
                return InvokeResponse::failure(put.error());
            }
            descriptors[i].kind = StorageKind::object_store;
            descriptors[i].locator = "edges/" + object;
            break;
        }
        }
    }

    auto call_one = [&](std::size_t i) -> InvokeResponse {
        if (via_truffle) {
            // The producer fires at its node-local sidecar, which stages the
            // output and passes it ahead of the downstream cold start.
            RequestEnvelope envelope;
            envelope.target_function = targets[i];
            envelope.trace_id = trace_id;
            envelope.storage = descriptors[i];
            envelope.inline_payload = std::move(inline_payloads[i]);
            return deployed.node->ingress.handle_invoke(std::move(envelope));
        }
        Request request;
        request.target = targets[i];
        request.trace_id = trace_id;
        request.inline_payload = std::move(inline_payloads[i]);
        if (descriptors[i].kind != StorageKind::direct) {
            request.storage = descriptors[i];
        }
        return invoke(std::move(request));
    };

    if (targets.size() == 1) {
        return call_one(0);
    }

    // Fan-out: all edges leave together, each with its own pass.
    std::vector<std::future<InvokeResponse>> children;
    children.reserve(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        children.push_back(std::async(std::launch::async, call_one, i));
    }
    std::vector<InvokeResponse> responses;
    responses.reserve(targets.size());
    for (auto& child : children) {
        responses.push_back(child.get());
    }
    for (auto& response : responses) {
        if (response.status != 200) {
            return std::move(response);
        }
    }
    InvokeResponse combined;
    combined.status = 200;
    combined.content_type = "text/plain";
    for (std::size_t i = 0; i < responses.size(); ++i) {
        if (i > 0) {
            combined.body += "|";
        }
        combined.body += responses[i].body;
    }
    return combined;
}

InvokeResponse SimPlatform::invoke(Request request) {
    Deployed deployed;
    {
        std::lock_guard lock(mu_);
        auto it = functions_.find(request.target);
        if (it == functions_.end()) {
            return InvokeResponse::failure(
                {Errc::not_found, "no such function: " + request.target});
        }
        deployed = it->second;
    }

    const bool via_truffle = !request.reference_key.empty();
    const std::string invocation_id =
        via_truffle ? request.reference_key : make_reference_key();
    const std::string trace_id =
        request.trace_id.empty() ? make_reference_key() : request.trace_id;
    const std::string host = deployed.node->ingress.self_host();
    auto* sink = runtime_.sink;
    auto stamp = [&](std::string_view phase) {
        if (sink != nullptr) {
            sink->on_phase(trace_id, invocation_id, phase,
                           std::chrono::steady_clock::now());
        }
    };

    if (sink != nullptr) {
        sink->on_invocation(trace_id, invocation_id, request.target, host);
    }
    if (!via_truffle) {
        // Through the sidecar, arrival was already stamped at the source.
        stamp(phase::kInvokeReceived);
    }

    bool is_warm;
    {
        std::lock_guard lock(mu_);
        is_warm = warm_.count(request.target) > 0;
    }

    if (!is_warm) {
        runtime_.clock.sleep_nominal(static_cast<double>(runtime_.scheduling_ms));
        stamp(phase::kScheduled);
        runtime_.watcher->ingest_event({request.target, host, EventKind::scheduled,
                                        std::chrono::steady_clock::now()});
        runtime_.clock.sleep_nominal(static_cast<double>(
            deployed.spec.cold_start_ms + deployed.spec.added_delay_ms));
        stamp(phase::kColdStartEnd);
        runtime_.watcher->ingest_event({request.target, host, EventKind::running,
                                        std::chrono::steady_clock::now()});
    } else {
        // A running instance has no cold start; its lifecycle baseline for
        // IO accounting starts right here.
        stamp(phase::kColdStartEnd);
    }

    auto scale_down = [&] {
        if (!is_warm) {
            runtime_.watcher->ingest_event({request.target, "", EventKind::terminated,
                                            std::chrono::steady_clock::now()});
        }
    };

    auto input = read_input(request, deployed);
    if (!input.ok()) {
        if (sink != nullptr) {
            sink->on_failure(trace_id, invocation_id, phase::kDataReady,
                             input.error().detail);
        }
        scale_down();
        return InvokeResponse::failure(input.error());
    }
    stamp(phase::kDataReady);

    stamp(phase::kComputeStart);
    runtime_.clock.sleep_nominal(static_cast<double>(deployed.spec.compute_ms));
    stamp(phase::kComputeEnd);

    InvokeResponse out;
    if (deployed.spec.downstream.empty()) {
        out.status = 200;
        out.body = payload_digest(input.value());
        out.content_type = "text/plain";
    } else {
        out = relay_downstream(deployed, via_truffle, std::move(input).value(),
                               trace_id, invocation_id);
    }
    stamp(phase::kResponse);
    scale_down();
    return out;
}

Result<void> SimPlatform::start() {
    const int bound = impl_->server.bind_to_any_port("127.0.0.1");
    if (bound < 0) {
        return {Errc::transport, "platform could not bind a loopback port"};
    }
    impl_->port = bound;
    impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return {};
}

void SimPlatform::stop() {
    if (impl_->listener.joinable()) {
        impl_->server.stop();
        impl_->listener.join();
    }
}

int SimPlatform::port() const {
    return impl_->port;
}

std::string SimPlatform::addr() const {
    return "127.0.0.1:" + std::to_string(impl_->port.load());
}

}  // namespace truffle::sim
