#include "truffle/ingress.hpp"

#include <atomic>
#include <future>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>

#include "truffle/ids.hpp"
#include "truffle/wire.hpp"

namespace truffle {

namespace {

std::pair<std::string, int> split_addr(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) {
        return {addr, 0};
    }
    return {addr.substr(0, colon), std::atoi(addr.c_str() + colon + 1)};
}

void reply(httplib::Response& res, const InvokeResponse& out) {
    res.status = out.status;
    res.set_content(out.body, out.content_type);
}

void reply_error(httplib::Response& res, const Error& err) {
    res.status = wire::status_for(err.code);
    res.set_content(wire::error_body(err), "application/json");
}

}  // namespace

Result<void> RequestEnvelope::validate() const {
    if (target_function.empty()) {
        return {Errc::invalid_argument, "missing target function"};
    }
    if (auto shape = storage.validate(); !shape.ok()) {
        return shape;
    }
    const bool direct = storage.kind == StorageKind::direct;
    if (direct && !inline_payload.has_value()) {
        return {Errc::invalid_argument, "direct invocation without inline payload"};
    }
    if (!direct && inline_payload.has_value()) {
        return {Errc::invalid_argument,
                "inline payload not allowed with a storage descriptor"};
    }
    if (buffer_name != "default") {
        return {Errc::invalid_argument, "unknown buffer: " + buffer_name};
    }
    return {};
}

InvokeResponse InvokeResponse::failure(const Error& err) {
    return {wire::status_for(err.code), wire::error_body(err), "application/json"};
}

struct Ingress::Impl {
    httplib::Server server;
    std::thread listener;
    std::atomic<int> port{0};

    // In-flight prefetch/pass tasks.  Reaped opportunistically so a slow or
    // abandoned task never delays an invocation response; stop() drains them.
    std::mutex tasks_mu;
    std::vector<std::future<void>> tasks;

    void add_task(std::future<void> task) {
        std::lock_guard lock(tasks_mu);
        tasks.erase(std::remove_if(tasks.begin(), tasks.end(),
                                   [](std::future<void>& f) {
                                       return f.wait_for(std::chrono::seconds(0)) ==
                                              std::future_status::ready;
                                   }),
                    tasks.end());
        tasks.push_back(std::move(task));
    }

    void drain_tasks() {
        std::vector<std::future<void>> pending;
        {
            std::lock_guard lock(tasks_mu);
            pending.swap(tasks);
        }
        for (auto& task : pending) {
            task.wait();
        }
    }
};

Ingress::Ingress(Config config, Buffer& buffer, Watcher& watcher,
                 const DataEngine& engine, TraceSink* sink)
    : config_(std::move(config)),
      buffer_(buffer),
      watcher_(watcher),
      engine_(engine),
      sink_(sink),
      impl_(std::make_unique<Impl>()) {
    auto& server = impl_->server;

    server.Post("/invoke", [this](const httplib::Request& req, httplib::Response& res) {
        RequestEnvelope envelope;
        envelope.target_function = req.get_header_value(wire::kHdrTarget);
        envelope.trace_id = req.get_header_value(wire::kHdrTrace);
        if (req.has_header(wire::kHdrBuffer)) {
            envelope.buffer_name = req.get_header_value(wire::kHdrBuffer);
        }

        std::string kind_text = "direct";
        if (req.has_header(wire::kHdrStorageKind)) {
            kind_text = req.get_header_value(wire::kHdrStorageKind);
        }
        auto kind = parse_storage_kind(kind_text);
        if (!kind.ok()) {
            reply_error(res, kind.error());
            return;
        }
        envelope.storage.kind = kind.value();
        envelope.storage.locator = req.get_header_value(wire::kHdrLocator);
        envelope.storage.endpoint = req.get_header_value(wire::kHdrEndpoint);
        envelope.storage.credentials_ref = req.get_header_value(wire::kHdrCredentialsRef);
        if (envelope.storage.kind == StorageKind::direct) {
            envelope.inline_payload = req.body;
        } else if (!req.body.empty()) {
            envelope.inline_payload = req.body;  // rejected by validate()
        }

        reply(res, handle_invoke(std::move(envelope)));
    });

    server.Get(R"(/truffle/buffer/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                   auto got = serve_buffer_read(req.matches[1]);
                   if (!got.ok()) {
                       reply_error(res, got.error());
                       return;
                   }
                   res.set_content(std::move(got).value(), "application/octet-stream");
               });

    server.Post(R"(/truffle/transfer/([^/]+))",
                [this](const httplib::Request& req, httplib::Response& res) {
                    auto put = receive_peer_transfer(req.matches[1], req.body);
                    if (!put.ok()) {
                        reply_error(res, put.error());
                        return;
                    }
                    res.status = 200;
                });
}

Ingress::~Ingress() {
    stop();
}

ColdStartPass& Ingress::pass() {
    std::call_once(pass_once_, [this] {
        ColdStartPass::Config cfg;
        cfg.self_host = self_host();
        cfg.wait_timeout = config_.pass_wait_timeout;
        cfg.transfer_charge = config_.direct_transfer_charge;
        pass_ = std::make_unique<ColdStartPass>(watcher_, std::move(cfg));
    });
    return *pass_;
}

InvokeResponse Ingress::handle_invoke(RequestEnvelope envelope) {
    if (auto valid = envelope.validate(); !valid.ok()) {
        return InvokeResponse::failure(valid.error());
    }
    if (watcher_.is_running(envelope.target_function)) {
        return invoke_passthrough(envelope);
    }
    return invoke_cold(std::move(envelope));
}

InvokeResponse Ingress::invoke_cold(RequestEnvelope&& envelope) {
    const auto received_at = std::chrono::steady_clock::now();
    const std::string key = make_reference_key();
    const std::string target = envelope.target_function;
    const std::string trace_id =
        envelope.trace_id.empty() ? make_reference_key() : envelope.trace_id;

    if (auto announced = buffer_.announce(key); !announced.ok()) {
        return InvokeResponse::failure(announced.error());
    }
    if (sink_ != nullptr) {
        sink_->on_invocation(trace_id, key, target, self_host());
        sink_->on_phase(trace_id, key, phase::kInvokeReceived, received_at);
    }

    // Fork: the prefetch and the platform forward leave together; the pass
    // task rides along and ships the bytes once the target's host is known.
    const bool charge_transfer = envelope.storage.kind == StorageKind::direct;
    auto shared = std::make_shared<RequestEnvelope>(std::move(envelope));
    impl_->add_task(std::async(std::launch::async, [this, shared, key, trace_id] {
        if (sink_ != nullptr) {
            sink_->on_phase(trace_id, key, phase::kPrefetchStart,
                            std::chrono::steady_clock::now());
        }
        engine_.prefetch(shared->storage, std::move(shared->inline_payload), key,
                         buffer_);
    }));
    impl_->add_task(std::async(std::launch::async, [this, target, key, trace_id,
                                                    charge_transfer] {
        // Payloads that came from a storage backend were charged there; only
        // inline payloads pay the inter-node shipping cost here.
        std::optional<std::function<void(std::uint64_t)>> charge;
        if (!charge_transfer) {
            charge.emplace();
        }
        auto report = pass().initiate_pass_deferred(
            target, key,
            [this, key]() -> Result<Payload> {
                return buffer_.take(key, config_.take_timeout);
            },
            std::move(charge));
        if (sink_ != nullptr) {
            sink_->on_transfer(trace_id, key, report);
        }
    }));

    if (sink_ != nullptr) {
        sink_->on_phase(trace_id, key, phase::kPlatformForwardStart,
                        std::chrono::steady_clock::now());
    }
    auto forwarded = forward_to_platform(target, key, trace_id);
    if (!forwarded.ok()) {
        // Unblock the pass and any function-side reader quickly.  Best-effort:
        // an already-resolved slot stays as it is.
        (void)buffer_.mark_failed(key, std::string(to_string(forwarded.code())) + ": " +
                                           forwarded.error().detail);
        if (sink_ != nullptr) {
            sink_->on_failure(trace_id, key, phase::kPlatformForwardStart,
                              forwarded.error().detail);
        }
        return InvokeResponse::failure(forwarded.error());
    }
    if (sink_ != nullptr) {
        sink_->on_phase(trace_id, key, phase::kResponse, std::chrono::steady_clock::now());
    }
    return std::move(forwarded).value();
}

InvokeResponse Ingress::invoke_passthrough(const RequestEnvelope& envelope) {
    const auto [host, port] = split_addr(config_.platform_addr);
    httplib::Client client(host, port);
    client.set_connection_timeout(10, 0);
    const auto timeout_sec =
        std::chrono::duration_cast<std::chrono::seconds>(config_.platform_timeout);
    client.set_read_timeout(timeout_sec.count(), 0);
    client.set_write_timeout(timeout_sec.count(), 0);

    httplib::Headers headers{{wire::kHdrTarget, envelope.target_function}};
    if (!envelope.trace_id.empty()) {
        headers.emplace(wire::kHdrTrace, envelope.trace_id);
    }
    if (envelope.storage.kind != StorageKind::direct) {
        headers.emplace(wire::kHdrStorageKind, std::string(to_string(envelope.storage.kind)));
        headers.emplace(wire::kHdrLocator, envelope.storage.locator);
        headers.emplace(wire::kHdrEndpoint, envelope.storage.endpoint);
        if (!envelope.storage.credentials_ref.empty()) {
            headers.emplace(wire::kHdrCredentialsRef, envelope.storage.credentials_ref);
        }
    }

    static const Payload kNoBody;
    const Payload& body =
        envelope.inline_payload.has_value() ? *envelope.inline_payload : kNoBody;
    auto res = client.Post("/invoke", headers, body, "application/octet-stream");
    if (!res) {
        const Errc code = (res.error() == httplib::Error::Read ||
                           res.error() == httplib::Error::Write)
                              ? Errc::platform_timeout
                              : Errc::platform_unreachable;
        return InvokeResponse::failure(
            {code, "platform: " + httplib::to_string(res.error())});
    }
    InvokeResponse out;
    out.status = res->status;
    out.body = std::move(res->body);
    if (res->has_header("Content-Type")) {
        out.content_type = res->get_header_value("Content-Type");
    }
    return out;
}

Result<InvokeResponse> Ingress::forward_to_platform(const std::string& target_function,
                                                    const std::string& reference_key,
                                                    const std::string& trace_id) {
    const auto [host, port] = split_addr(config_.platform_addr);
    httplib::Client client(host, port);
    client.set_connection_timeout(10, 0);
    const auto timeout_sec =
        std::chrono::duration_cast<std::chrono::seconds>(config_.platform_timeout);
    client.set_read_timeout(timeout_sec.count(), 0);
    client.set_write_timeout(timeout_sec.count(), 0);

    httplib::Headers headers{{wire::kHdrTarget, target_function},
                             {wire::kHdrKey, reference_key}};
    if (!trace_id.empty()) {
        headers.emplace(wire::kHdrTrace, trace_id);
    }
    auto res = client.Post("/invoke", headers, Payload{}, "application/octet-stream");
    if (!res) {
        if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write) {
            return {Errc::platform_timeout,
                    "platform did not answer: " + httplib::to_string(res.error())};
        }
        return {Errc::platform_unreachable,
                "platform unreachable: " + httplib::to_string(res.error())};
    }
    InvokeResponse out;
    out.status = res->status;
    out.body = std::move(res->body);
    if (res->has_header("Content-Type")) {
        out.content_type = res->get_header_value("Content-Type");
    }
    return out;
}

Result<Payload> Ingress::serve_buffer_read(const std::string& key) {
    return buffer_.take(key, config_.take_timeout);
}

Result<void> Ingress::receive_peer_transfer(const std::string& key, Payload payload) {
    return buffer_.put(key, std::move(payload));
}

Result<void> Ingress::start() {
    auto& server = impl_->server;
    const auto [host, port] = split_addr(config_.listen_addr);
    int bound = port;
    if (port == 0) {
        bound = server.bind_to_any_port(host);
        if (bound < 0) {
            return {Errc::transport, "could not bind " + config_.listen_addr};
        }
    } else if (!server.bind_to_port(host, port)) {
        return {Errc::transport, "could not bind " + config_.listen_addr};
    }
    impl_->port = bound;
    impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
    server.wait_until_ready();
    return {};
}

void Ingress::stop() {
    if (impl_->listener.joinable()) {
        impl_->server.stop();
        impl_->listener.join();
    }
    impl_->drain_tasks();
}

int Ingress::port() const {
    return impl_->port;
}

std::string Ingress::self_host() const {
    const auto [host, port] = split_addr(config_.listen_addr);
    const int bound = impl_->port.load();
    return host + ":" + std::to_string(bound != 0 ? bound : port);
}

}  // namespace truffle
