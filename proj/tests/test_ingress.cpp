#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "truffle/data_engine.hpp"
#include "truffle/ingress.hpp"
#include "truffle/sim/adapters.hpp"
#include "truffle/sim/backend.hpp"
#include "truffle/trace.hpp"
#include "truffle/watcher.hpp"
#include "truffle/wire.hpp"

using namespace truffle;
using namespace std::chrono_literals;

namespace {

bool wait_until(const std::function<bool()>& done,
                std::chrono::milliseconds timeout = 2000ms) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        if (done()) {
            return true;
        }
        std::this_thread::sleep_for(5ms);
    }
    return done();
}

/// What one /invoke request looked like when it reached the platform.
struct PlatformCapture {
    std::string target;
    std::string key;
    bool saw_key = false;
    std::string trace;
    std::string storage_kind;
    std::string locator;
    std::string endpoint;
    std::string body;
};

/// Minimal stand-in for the serverless platform: records every /invoke and
/// answers with a canned body (or an echo of the request body).
class FakePlatform {
public:
    FakePlatform() {
        server_.Post("/invoke", [this](const httplib::Request& req,
                                       httplib::Response& res) {
            PlatformCapture cap;
            cap.target = req.get_header_value(wire::kHdrTarget);
            cap.saw_key = req.has_header(wire::kHdrKey);
            cap.key = req.get_header_value(wire::kHdrKey);
            cap.trace = req.get_header_value(wire::kHdrTrace);
            cap.storage_kind = req.get_header_value(wire::kHdrStorageKind);
            cap.locator = req.get_header_value(wire::kHdrLocator);
            cap.endpoint = req.get_header_value(wire::kHdrEndpoint);
            cap.body = req.body;
            {
                std::lock_guard lock(mu_);
                captures_.push_back(cap);
            }
            if (delay_.count() > 0) {
                std::this_thread::sleep_for(delay_);
            }
            res.set_content(echo_ ? req.body : response_body_,
                            "application/octet-stream");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        REQUIRE(port_ > 0);
        listener_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~FakePlatform() {
        server_.stop();
        listener_.join();
    }

    std::string addr() const { return "127.0.0.1:" + std::to_string(port_); }

    void respond_with(std::string body) { response_body_ = std::move(body); }
    void echo_request_body() { echo_ = true; }
    void delay_responses(std::chrono::milliseconds delay) { delay_ = delay; }

    std::size_t requests() const {
        std::lock_guard lock(mu_);
        return captures_.size();
    }
    PlatformCapture capture(std::size_t i = 0) const {
        std::lock_guard lock(mu_);
        REQUIRE(i < captures_.size());
        return captures_[i];
    }

private:
    httplib::Server server_;
    std::thread listener_;
    int port_ = 0;
    std::string response_body_ = "ok";
    bool echo_ = false;
    std::chrono::milliseconds delay_{0};
    mutable std::mutex mu_;
    std::vector<PlatformCapture> captures_;
};

/// Thread-safe capture of everything the sidecar reports.
class RecordingSink final : public TraceSink {
public:
    struct Stamp {
        std::string invocation;
        std::string phase;
        std::chrono::steady_clock::time_point at;
    };

    void on_invocation(const std::string& trace_id, const std::string& invocation_id,
                       const std::string& function_name, const std::string& host) override {
        std::lock_guard lock(mu_);
        trace_id_ = trace_id;
        invocation_id_ = invocation_id;
        function_name_ = function_name;
        host_ = host;
    }

    void on_phase(const std::string&, const std::string& invocation_id,
                  std::string_view phase,
                  std::chrono::steady_clock::time_point at) override {
        std::lock_guard lock(mu_);
        stamps_.push_back({invocation_id, std::string(phase), at});
    }

    void on_transfer(const std::string&, const std::string&,
                     const TransferReport& report) override {
        std::lock_guard lock(mu_);
        transfers_.push_back(report);
    }

    void on_failure(const std::string&, const std::string&, std::string_view phase,
                    const std::string& detail) override {
        std::lock_guard lock(mu_);
        failures_.push_back(std::string(phase) + ": " + detail);
    }

    std::string invocation_id() const {
        std::lock_guard lock(mu_);
        return invocation_id_;
    }
    std::string function_name() const {
        std::lock_guard lock(mu_);
        return function_name_;
    }
    bool saw_invocation() const { return !invocation_id().empty(); }

    std::optional<std::chrono::steady_clock::time_point> phase_at(
        std::string_view phase) const {
        std::lock_guard lock(mu_);
        for (const auto& stamp : stamps_) {
            if (stamp.phase == phase) {
                return stamp.at;
            }
        }
        return std::nullopt;
    }

    std::size_t transfer_count() const {
        std::lock_guard lock(mu_);
        return transfers_.size();
    }
    TransferReport transfer(std::size_t i = 0) const {
        std::lock_guard lock(mu_);
        REQUIRE(i < transfers_.size());
        return transfers_[i];
    }

    std::vector<std::string> failures() const {
        std::lock_guard lock(mu_);
        return failures_;
    }

private:
    mutable std::mutex mu_;
    std::string trace_id_, invocation_id_, function_name_, host_;
    std::vector<Stamp> stamps_;
    std::vector<TransferReport> transfers_;
    std::vector<std::string> failures_;
};

DataEngine make_direct_engine() {
    DataEngine engine;
    (void)engine.register_adapter(std::make_shared<DirectAdapter>());
    return engine;
}

RequestEnvelope direct_envelope(std::string target, Payload payload) {
    RequestEnvelope envelope;
    envelope.target_function = std::move(target);
    envelope.storage.kind = StorageKind::direct;
    envelope.inline_payload = std::move(payload);
    return envelope;
}

/// A second sidecar acting as the remote peer for pass deliveries.
struct Peer {
    Buffer buffer;
    Watcher watcher;
    DataEngine engine;
    Ingress ingress;

    Peer()
        : ingress({.listen_addr = "127.0.0.1:0", .platform_addr = "127.0.0.1:1"},
                  buffer, watcher, engine) {
        REQUIRE(ingress.start().ok());
    }
    ~Peer() { ingress.stop(); }

    std::string host() const { return ingress.self_host(); }
};

SchedulingEvent scheduled(std::string fn, std::string host) {
    return {std::move(fn), std::move(host), EventKind::scheduled,
            std::chrono::steady_clock::now()};
}

}  // namespace

TEST_CASE("a cold invocation forwards the key and ships the payload to the peer") {
    FakePlatform platform;
    platform.respond_with("function-response");
    Peer peer;

    Buffer buffer;
    Watcher watcher;
    auto engine = make_direct_engine();
    RecordingSink sink;
    Ingress ingress({.listen_addr = "127.0.0.1:0",
                     .platform_addr = platform.addr(),
                     .take_timeout = 2000ms,
                     .platform_timeout = 10000ms,
                     .pass_wait_timeout = 2000ms},
                    buffer, watcher, engine, &sink);
    REQUIRE(ingress.start().ok());

    // The orchestrator schedules the target onto the peer node a moment
    // after the invocation arrives, as a real cold start would.
    std::thread orchestrator([&] {
        std::this_thread::sleep_for(30ms);
        CHECK(watcher.ingest_event(scheduled("f1", peer.host())));
    });

    const Payload payload(256 * 1024, 'p');
    auto response = ingress.handle_invoke(direct_envelope("f1", payload));
    orchestrator.join();

    CHECK(response.status == 200);
    CHECK(response.body == "function-response");

    // The platform saw a reference, never the bytes.
    REQUIRE(platform.requests() == 1);
    const auto cap = platform.capture();
    CHECK(cap.target == "f1");
    CHECK(cap.saw_key);
    CHECK_FALSE(cap.key.empty());
    CHECK(cap.body.empty());
    CHECK_FALSE(cap.trace.empty());
    CHECK(cap.key == sink.invocation_id());

    // The payload crossed node-to-node into the peer's buffer.
    auto landed = peer.buffer.take(cap.key, 2000ms);
    REQUIRE(landed.ok());
    CHECK(landed.value() == payload);

    REQUIRE(wait_until([&] { return sink.transfer_count() == 1; }));
    const auto report = sink.transfer();
    CHECK(report.delivered());
    CHECK(report.bytes == payload.size());
    CHECK(report.host == peer.host());

    // The fork leaves no meaningful gap between arrival and the forward.
    auto received = sink.phase_at(phase::kInvokeReceived);
    auto forward = sink.phase_at(phase::kPlatformForwardStart);
    auto responded = sink.phase_at(phase::kResponse);
    REQUIRE(received.has_value());
    REQUIRE(forward.has_value());
    REQUIRE(responded.has_value());
    CHECK(*received <= *forward);
    CHECK(*forward <= *responded);
    CHECK(std::chrono::duration<double, std::milli>(*forward - *received).count() <
          50.0);
    REQUIRE(wait_until([&] { return sink.phase_at(phase::kPrefetchStart).has_value(); }));

    ingress.stop();
}

TEST_CASE("a target scheduled onto this node keeps its payload local") {
    FakePlatform platform;
    Buffer buffer;
    Watcher watcher;
    auto engine = make_direct_engine();
    RecordingSink sink;
    Ingress ingress({.listen_addr = "127.0.0.1:0",
                     .platform_addr = platform.addr(),
                     .take_timeout = 2000ms,
                     .platform_timeout = 10000ms,
                     .pass_wait_timeout = 2000ms},
                    buffer, watcher, engine, &sink);
    REQUIRE(ingress.start().ok());

    std::thread orchestrator([&] {
        std::this_thread::sleep_for(30ms);
        CHECK(watcher.ingest_event(scheduled("f1", ingress.self_host())));
    });

    auto response = ingress.handle_invoke(direct_envelope("f1", "stay-here"));
    orchestrator.join();
    CHECK(response.status == 200);

    REQUIRE(wait_until([&] { return sink.transfer_count() == 1; }));
    CHECK(sink.transfer().outcome == TransferReport::Outcome::local_no_transfer);

    // The co-located function's read finds the bytes in the node buffer.
    auto local = buffer.take(sink.invocation_id(), 2000ms);
    REQUIRE(local.ok());
    CHECK(local.value() == "stay-here");

    ingress.stop();
}

TEST_CASE("a hot target passes straight through, body and response bit-exact") {
    FakePlatform platform;
    platform.echo_request_body();

    Buffer buffer;
    Watcher watcher;
    auto engine = make_direct_engine();
    RecordingSink sink;
    Ingress ingress({.listen_addr = "127.0.0.1:0", .platform_addr = platform.addr()},
                    buffer, watcher, engine, &sink);

    CHECK(watcher.ingest_event(
        {"f1", "anywhere:1", EventKind::running, std::chrono::steady_clock::now()}));

    const Payload payload(64 * 1024, 'q');
    auto response = ingress.handle_invoke(direct_envelope("f1", payload));
    CHECK(response.status == 200);
    CHECK(response.body == payload);

    REQUIRE(platform.requests() == 1);
    const auto cap = platform.capture();
    CHECK(cap.body == payload);        // the bytes travel with the request
    CHECK_FALSE(cap.saw_key);          // no reference indirection when hot
    CHECK(cap.target == "f1");

    CHECK(buffer.entry_count() == 0);  // nothing staged, nothing leaked
    CHECK_FALSE(sink.saw_invocation());
}

TEST_CASE("a hot non-direct target forwards its storage descriptor untouched") {
    FakePlatform platform;
    Buffer buffer;
    Watcher watcher;
    auto engine = make_direct_engine();
    Ingress ingress({.listen_addr = "127.0.0.1:0", .platform_addr = platform.addr()},
                    buffer, watcher, engine);

    CHECK(watcher.ingest_event(
        {"f2", "anywhere:1", EventKind::running, std::chrono::steady_clock::now()}));

    RequestEnvelope envelope;
    envelope.target_function = "f2";
    envelope.storage.kind = StorageKind::kvs;
    envelope.storage.locator = "frames/42";
    envelope.storage.endpoint = "127.0.0.1:9999";
    auto response = ingress.handle_invoke(std::move(envelope));
    CHECK(response.status == 200);

    REQUIRE(platform.requests() == 1);
    const auto cap = platform.capture();
    CHECK(cap.storage_kind == "kvs");
    CHECK(cap.locator == "frames/42");
    CHECK(cap.endpoint == "127.0.0.1:9999");
    CHECK(cap.body.empty());
    CHECK_FALSE(cap.saw_key);
}

TEST_CASE("a cold non-direct invocation prefetches into the local buffer") {
    FakePlatform platform;
    sim::SimClock instant(0.0);
    sim::InMemoryKvs kvs({0.0, 0.0}, instant);
    sim::InMemoryObjectStore object_store({0.0, 0.0}, instant);
    REQUIRE(kvs.put("k1", "kvs-bytes").ok());
    auto engine = sim::make_service_engine(&kvs, &object_store, nullptr);

    Buffer buffer;
    Watcher watcher;
    RecordingSink sink;
    Ingress ingress({.listen_addr = "127.0.0.1:0",
                     .platform_addr = platform.addr(),
                     .take_timeout = 500ms,
                     .platform_timeout = 10000ms,
                     .pass_wait_timeout = 100ms},
                    buffer, watcher, engine, &sink);

    RequestEnvelope envelope;
    envelope.target_function = "f1";
    envelope.storage.kind = StorageKind::kvs;
    envelope.storage.locator = "k1";
    auto response = ingress.handle_invoke(std::move(envelope));
    CHECK(response.status == 200);

    // No scheduling event ever arrives, so the pass gives up; the prefetched
    // payload stays for whatever lands on this node.
    REQUIRE(wait_until([&] { return sink.transfer_count() == 1; }));
    CHECK(sink.transfer().outcome == TransferReport::Outcome::scheduling_timeout);

    auto local = buffer.take(sink.invocation_id(), 1000ms);
    REQUIRE(local.ok());
    CHECK(local.value() == "kvs-bytes");
}

TEST_CASE("malformed invocations are rejected before any work happens") {
    FakePlatform platform;
    Buffer buffer;
    Watcher watcher;
    auto engine = make_direct_engine();
    RecordingSink sink;
    Ingress ingress({.listen_addr = "127.0.0.1:0", .platform_addr = platform.addr()},
                    buffer, watcher, engine, &sink);

    auto expect_rejected = [&](RequestEnvelope envelope) {
        auto response = ingress.handle_invoke(std::move(envelope));
        CHECK(response.status == 400);
        auto err = wire::parse_error_body(response.body);
        REQUIRE(err.has_value());
        CHECK(err->code == Errc::invalid_argument);
    };

    expect_rejected(direct_envelope("", "payload"));  // no target

    RequestEnvelope no_payload;
    no_payload.target_function = "f1";
    no_payload.storage.kind = StorageKind::direct;
    expect_rejected(std::move(no_payload));  // direct without bytes

    RequestEnvelope both;
    both.target_function = "f1";
    both.storage.kind = StorageKind::kvs;
    both.storage.locator = "k1";
    both.inline_payload = "bytes";
    expect_rejected(std::move(both));  // inline bytes with a descriptor

    auto wrong_buffer = direct_envelope("f1", "payload");
    wrong_buffer.buffer_name = "cache";
    expect_rejected(std::move(wrong_buffer));  // only "default" exists

    CHECK(platform.requests() == 0);
    CHECK(buffer.entry_count() == 0);
    CHECK_FALSE(sink.saw_invocation());
}

TEST_CASE("an unreachable platform fails the invocation and unblocks readers") {
    Buffer buffer;
    Watcher watcher;
    auto engine = make_direct_engine();
    RecordingSink sink;
    Ingress ingress({.listen_addr = "127.0.0.1:0",
                     .platform_addr = "127.0.0.1:1",  // nothing listens here
                     .take_timeout = 500ms,
                     .platform_timeout = 10000ms,
                     .pass_wait_timeout = 100ms},
                    buffer, watcher, engine, &sink);

    auto response = ingress.handle_invoke(direct_envelope("f1", "payload"));
    CHECK(response.status == 502);
    auto err = wire::parse_error_body(response.body);
    REQUIRE(err.has_value());
    CHECK(err->code == Errc::platform_unreachable);

    REQUIRE(wait_until([&] { return !sink.failures().empty(); }));
    CHECK(sink.failures().front().find(phase::kPlatformForwardStart) == 0);
    REQUIRE(wait_until([&] { return sink.transfer_count() == 1; }));
    CHECK(sink.transfer().outcome == TransferReport::Outcome::scheduling_timeout);
}

TEST_CASE("a platform that never answers turns into a timeout failure") {
    FakePlatform platform;
    platform.delay_responses(2500ms);

    Buffer buffer;
    Watcher watcher;
    auto engine = make_direct_engine();
    Ingress ingress({.listen_addr = "127.0.0.1:0",
                     .platform_addr = platform.addr(),
                     .take_timeout = 300ms,
                     .platform_timeout = 1000ms,
                     .pass_wait_timeout = 100ms},
                    buffer, watcher, engine);

    const auto started = std::chrono::steady_clock::now();
    auto response = ingress.handle_invoke(direct_envelope("f1", "payload"));
    const double waited =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  started)
            .count();
    CHECK(response.status == 504);
    auto err = wire::parse_error_body(response.body);
    REQUIRE(err.has_value());
    CHECK(err->code == Errc::platform_timeout);
    CHECK(waited >= 900.0);
    CHECK(waited < 2400.0);
}

TEST_CASE("the wire invoke route round-trips a hot invocation") {
    FakePlatform platform;
    platform.echo_request_body();

    Buffer buffer;
    Watcher watcher;
    auto engine = make_direct_engine();
    Ingress ingress({.listen_addr = "127.0.0.1:0", .platform_addr = platform.addr()},
                    buffer, watcher, engine);
    REQUIRE(ingress.start().ok());

    CHECK(watcher.ingest_event(
        {"f1", "anywhere:1", EventKind::running, std::chrono::steady_clock::now()}));

    httplib::Client client("127.0.0.1", ingress.port());
    httplib::Headers headers{{wire::kHdrTarget, "f1"}};
    auto res = client.Post("/invoke", headers, "wire-payload",
                           "application/octet-stream");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == "wire-payload");

    // Unknown storage kinds die at the door.
    httplib::Headers bad{{wire::kHdrTarget, "f1"},
                         {wire::kHdrStorageKind, "carrier-pigeon"}};
    auto rejected = client.Post("/invoke", bad, "x", "application/octet-stream");
    REQUIRE(rejected);
    CHECK(rejected->status == 400);

    // A missing target never reaches the platform.
    auto anonymous = client.Post("/invoke", httplib::Headers{}, "x",
                                 "application/octet-stream");
    REQUIRE(anonymous);
    CHECK(anonymous->status == 400);

    CHECK(platform.requests() == 1);
    ingress.stop();
}

TEST_CASE("the wire buffer routes serve reads and peer deposits") {
    Buffer buffer;
    Watcher watcher;
    auto engine = make_direct_engine();
    Ingress ingress({.listen_addr = "127.0.0.1:0",
                     .platform_addr = "127.0.0.1:1",
                     .take_timeout = 150ms},
                    buffer, watcher, engine);
    REQUIRE(ingress.start().ok());

    httplib::Client client("127.0.0.1", ingress.port());
    client.set_read_timeout(5, 0);

    auto deposit = client.Post("/truffle/transfer/kt", "zzz",
                               "application/octet-stream");
    REQUIRE(deposit);
    CHECK(deposit->status == 200);
    CHECK(buffer.status("kt") == EntryState::ready);

    auto read = client.Get("/truffle/buffer/kt");
    REQUIRE(read);
    CHECK(read->status == 200);
    CHECK(read->body == "zzz");

    // The read consumed the entry: a second read of the same key is a miss,
    // and a second deposit conflicts instead of resurrecting it.
    auto reread = client.Get("/truffle/buffer/kt");
    REQUIRE(reread);
    CHECK(reread->status == 404);

    auto redeposit = client.Post("/truffle/transfer/kt", "yyy",
                                 "application/octet-stream");
    REQUIRE(redeposit);
    CHECK(redeposit->status == 409);
    auto err = wire::parse_error_body(redeposit->body);
    REQUIRE(err.has_value());
    CHECK(err->code == Errc::conflict);

    // A key nobody announced blocks, then times out.
    const auto started = std::chrono::steady_clock::now();
    auto absent = client.Get("/truffle/buffer/absent");
    const double waited =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  started)
            .count();
    REQUIRE(absent);
    CHECK(absent->status == 408);
    CHECK(waited >= 140.0);

    ingress.stop();
}
