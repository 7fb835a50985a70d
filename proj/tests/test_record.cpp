#include <doctest.h>

#include <chrono>
#include <string>

#include <json.hpp>

#include "truffle/pass.hpp"
#include "truffle/sim/record.hpp"
#include "truffle/trace.hpp"

using namespace truffle;
using namespace truffle::sim;
using namespace std::chrono_literals;

namespace {

using Clock = std::chrono::steady_clock;

// A fixed origin keeps the arithmetic in these tests exact: every stamp is
// origin + a whole number of milliseconds.
const Clock::time_point kOrigin = Clock::now();

Clock::time_point at_ms(std::int64_t ms) {
    return kOrigin + std::chrono::milliseconds(ms);
}

TransferReport delivered_report(std::uint64_t bytes) {
    TransferReport report;
    report.outcome = TransferReport::Outcome::delivered;
    report.target_function = "f1";
    report.reference_key = "key-1";
    report.host = "127.0.0.1:9999";
    report.wait_ms = 12.5;
    report.transfer_ms = 3.25;
    report.bytes = bytes;
    report.attempts = 1;
    return report;
}

}  // namespace

TEST_CASE("parse_mode accepts both spellings and rejects the rest") {
    REQUIRE(parse_mode("baseline").ok());
    CHECK(parse_mode("baseline").value() == Mode::baseline);
    REQUIRE(parse_mode("truffle").ok());
    CHECK(parse_mode("truffle").value() == Mode::truffle);
    CHECK(to_string(Mode::baseline) == "baseline");
    CHECK(to_string(Mode::truffle) == "truffle");

    auto bad = parse_mode("hybrid");
    REQUIRE(!bad.ok());
    CHECK(bad.error().code == Errc::invalid_argument);
}

TEST_CASE("builder assembles one function trace and forgets it on build") {
    RecordBuilder builder;
    builder.on_invocation("t1", "inv1", "f1", "node0");
    builder.on_phase("t1", "inv1", phase::kInvokeReceived, at_ms(0));
    builder.on_phase("t1", "inv1", phase::kScheduled, at_ms(20));
    builder.on_phase("t1", "inv1", phase::kColdStartEnd, at_ms(2395));
    builder.on_phase("t1", "inv1", phase::kDataReady, at_ms(2395));
    builder.on_phase("t1", "inv1", phase::kComputeStart, at_ms(2395));
    builder.on_phase("t1", "inv1", phase::kComputeEnd, at_ms(2410));
    builder.on_phase("t1", "inv1", phase::kResponse, at_ms(2410));
    builder.on_transfer("t1", "inv1", delivered_report(1024));
    CHECK(builder.open_traces() == 1);

    auto record = builder.build("t1", Mode::truffle);
    CHECK(builder.open_traces() == 0);
    CHECK(record.trace_id == "t1");
    CHECK(record.mode == Mode::truffle);
    CHECK(!record.failed);
    REQUIRE(record.functions.size() == 1);

    const auto& fn = record.functions.front();
    CHECK(fn.invocation_id == "inv1");
    CHECK(fn.function_name == "f1");
    CHECK(fn.host == "node0");
    CHECK(fn.phases.size() == 7);
    REQUIRE(fn.transfers.size() == 1);
    CHECK(fn.transfers.front().delivered());
    CHECK(fn.transfers.front().bytes == 1024);

    CHECK(record.end_to_end_ms == doctest::Approx(2410.0));
    CHECK(record.io_critical_path_ms == doctest::Approx(0.0));
    CHECK(record.validate().ok());
}

TEST_CASE("repeated stamps overwrite and repeated invocations refine the host") {
    RecordBuilder builder;
    // The source sidecar announces first; it only knows itself.
    builder.on_invocation("t1", "inv1", "f1", "127.0.0.1:4001");
    builder.on_phase("t1", "inv1", phase::kResponse, at_ms(100));
    // The platform announces later with the placement host, and the relay
    // restamps the response when the reply actually reaches the caller.
    builder.on_invocation("t1", "inv1", "f1", "127.0.0.1:4002");
    builder.on_phase("t1", "inv1", phase::kResponse, at_ms(150));

    auto record = builder.build("t1", Mode::truffle);
    REQUIRE(record.functions.size() == 1);
    CHECK(record.functions.front().host == "127.0.0.1:4002");
    REQUIRE(record.functions.front().phase(phase::kResponse).has_value());
    CHECK(*record.functions.front().phase(phase::kResponse) == at_ms(150));
}

TEST_CASE("functions appear in first-seen order and traces stay isolated") {
    RecordBuilder builder;
    builder.on_phase("t1", "inv-b", phase::kInvokeReceived, at_ms(0));
    builder.on_phase("t1", "inv-a", phase::kInvokeReceived, at_ms(5));
    builder.on_phase("t1", "inv-b", phase::kResponse, at_ms(50));
    builder.on_phase("t2", "other", phase::kInvokeReceived, at_ms(0));
    CHECK(builder.open_traces() == 2);

    auto record = builder.build("t1", Mode::baseline);
    REQUIRE(record.functions.size() == 2);
    CHECK(record.functions[0].invocation_id == "inv-b");
    CHECK(record.functions[1].invocation_id == "inv-a");
    CHECK(builder.open_traces() == 1);  // t2 untouched
}

TEST_CASE("building an unknown trace yields an empty record") {
    RecordBuilder builder;
    auto record = builder.build("never-seen", Mode::baseline);
    CHECK(record.functions.empty());
    CHECK(record.end_to_end_ms == 0.0);
    CHECK(record.io_critical_path_ms == 0.0);
    CHECK(record.validate().ok());
}

TEST_CASE("io critical path sums the per-function wait for data") {
    MeasurementRecord record;
    record.functions.resize(3);

    // Cold function that waited 1291ms for its input after starting.
    record.functions[0].phases[std::string(phase::kColdStartEnd)] = at_ms(2395);
    record.functions[0].phases[std::string(phase::kDataReady)] = at_ms(3686);
    // Function whose input was already buffered: no wait, clamped at zero.
    record.functions[1].phases[std::string(phase::kColdStartEnd)] = at_ms(4000);
    record.functions[1].phases[std::string(phase::kDataReady)] = at_ms(4000);
    // Function missing one of the stamps contributes nothing.
    record.functions[2].phases[std::string(phase::kColdStartEnd)] = at_ms(5000);

    finalize_durations(record);
    CHECK(record.io_critical_path_ms == doctest::Approx(1291.0));
    CHECK(record.end_to_end_ms == doctest::Approx(5000.0 - 2395.0));
}

TEST_CASE("a data_ready stamp before cold_start_end cannot go negative") {
    MeasurementRecord record;
    record.functions.resize(1);
    record.functions[0].phases[std::string(phase::kDataReady)] = at_ms(10);
    record.functions[0].phases[std::string(phase::kColdStartEnd)] = at_ms(40);

    finalize_durations(record);
    // 10 < 40: the synthetic trail is reversed, the contribution clamps.
    CHECK(record.io_critical_path_ms == doctest::Approx(0.0));
}

TEST_CASE("validate rejects a lifecycle that runs backwards") {
    RecordBuilder builder;
    builder.on_phase("t1", "inv1", phase::kColdStartEnd, at_ms(100));
    builder.on_phase("t1", "inv1", phase::kComputeStart, at_ms(60));
    auto record = builder.build("t1", Mode::baseline);

    auto verdict = record.validate();
    REQUIRE(!verdict.ok());
    CHECK(verdict.error().code == Errc::invalid_argument);
    CHECK(verdict.error().detail.find("compute_start") != std::string::npos);
}

TEST_CASE("validate rejects a tampered end_to_end duration") {
    RecordBuilder builder;
    builder.on_phase("t1", "inv1", phase::kInvokeReceived, at_ms(0));
    builder.on_phase("t1", "inv1", phase::kResponse, at_ms(500));
    auto record = builder.build("t1", Mode::baseline);
    CHECK(record.validate().ok());

    record.end_to_end_ms += 5.0;
    CHECK(!record.validate().ok());
}

TEST_CASE("json form carries offsets from the first stamp") {
    RecordBuilder builder;
    builder.on_invocation("t1", "inv1", "f1", "node0");
    builder.on_phase("t1", "inv1", phase::kInvokeReceived, at_ms(0));
    builder.on_phase("t1", "inv1", phase::kDataReady, at_ms(1291));
    builder.on_phase("t1", "inv1", phase::kResponse, at_ms(1306));
    builder.on_transfer("t1", "inv1", delivered_report(42));
    builder.on_failure("t1", "inv1", phase::kDataReady, "late arrival");

    auto record = builder.build("t1", Mode::truffle);
    record.failed = true;
    record.failure_detail = "downstream status 500";

    const auto doc = nlohmann::json::parse(record.to_json());
    CHECK(doc["trace_id"] == "t1");
    CHECK(doc["mode"] == "truffle");
    CHECK(doc["failed"] == true);
    CHECK(doc["failure_detail"] == "downstream status 500");
    CHECK(doc["end_to_end_ms"].get<double>() == doctest::Approx(1306.0));

    REQUIRE(doc["functions"].size() == 1);
    const auto& fn = doc["functions"][0];
    CHECK(fn["invocation_id"] == "inv1");
    CHECK(fn["function"] == "f1");
    CHECK(fn["host"] == "node0");
    CHECK(fn["phases"]["invoke_received"].get<double>() == doctest::Approx(0.0));
    CHECK(fn["phases"]["data_ready"].get<double>() == doctest::Approx(1291.0));
    CHECK(fn["phases"]["response"].get<double>() == doctest::Approx(1306.0));
    REQUIRE(fn["transfers"].size() == 1);
    CHECK(fn["transfers"][0]["outcome"] == "delivered");
    CHECK(fn["transfers"][0]["bytes"] == 42);
    CHECK(fn["transfers"][0]["attempts"] == 1);
    REQUIRE(fn["failures"].size() == 1);
    CHECK(fn["failures"][0] == "data_ready: late arrival");
}
