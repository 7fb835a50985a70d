#include "truffle/pass.hpp"

#include <httplib.h>

#include "truffle/wire.hpp"

namespace truffle {

namespace {

double ms_between(std::chrono::steady_clock::time_point from,
                  std::chrono::steady_clock::time_point to) {
    return std::chrono::duration<double, std::milli>(to - from).count();
}

}  // namespace

std::string_view to_string(TransferReport::Outcome outcome) {
    switch (outcome) {
    case TransferReport::Outcome::delivered:           return "delivered";
    case TransferReport::Outcome::local_no_transfer:   return "local_no_transfer";
    case TransferReport::Outcome::scheduling_timeout:  return "scheduling_timeout";
    case TransferReport::Outcome::payload_unavailable: return "payload_unavailable";
    case TransferReport::Outcome::transfer_failed:     return "transfer_failed";
    }
    return "unknown";
}

TransferReport ColdStartPass::initiate_pass(const std::string& target_function,
                                            const std::string& reference_key,
                                            Payload payload) {
    return initiate_pass_deferred(
        target_function, reference_key,
        [&payload]() -> Result<Payload> { return std::move(payload); });
}

TransferReport ColdStartPass::initiate_pass_deferred(
    const std::string& target_function, const std::string& reference_key,
    const std::function<Result<Payload>()>& acquire_payload,
    std::optional<std::function<void(std::uint64_t)>> charge_override) {
    TransferReport report;
    report.target_function = target_function;
    report.reference_key = reference_key;
    report.started_at = std::chrono::steady_clock::now();

    auto host = watcher_.wait_for_host(target_function, config_.wait_timeout);
    const auto host_known_at = std::chrono::steady_clock::now();
    report.wait_ms = ms_between(report.started_at, host_known_at);

    if (!host.ok()) {
        report.outcome = TransferReport::Outcome::scheduling_timeout;
        report.error = host.error();
        report.finished_at = host_known_at;
        return report;
    }
    report.host = host.value();

    if (!config_.self_host.empty() && report.host == config_.self_host) {
        // The target cold-starts on this very node; its read hits the local
        // buffer directly.
        report.outcome = TransferReport::Outcome::local_no_transfer;
        report.finished_at = host_known_at;
        return report;
    }

    auto payload = acquire_payload();
    if (!payload.ok()) {
        report.outcome = TransferReport::Outcome::payload_unavailable;
        report.error = payload.error();
        report.finished_at = std::chrono::steady_clock::now();
        return report;
    }
    report.bytes = payload.value().size();

    const auto& charge =
        charge_override.has_value() ? *charge_override : config_.transfer_charge;
    if (charge) {
        charge(report.bytes);
    }

    report.transfer_started_at = std::chrono::steady_clock::now();
    for (int attempt = 1; attempt <= 2; ++attempt) {
        report.attempts = attempt;
        auto sent = call_target_host_truffle(report.host, reference_key, payload.value());
        if (sent.ok()) {
            report.outcome = TransferReport::Outcome::delivered;
            report.error.reset();
            break;
        }
        report.outcome = TransferReport::Outcome::transfer_failed;
        report.error = sent.error();
    }
    report.finished_at = std::chrono::steady_clock::now();
    report.transfer_ms = ms_between(report.transfer_started_at, report.finished_at);
    return report;
}

Result<void> ColdStartPass::call_target_host_truffle(const std::string& host_address,
                                                     const std::string& reference_key,
                                                     const Payload& payload) {
    httplib::Client client("http://" + host_address);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    client.set_write_timeout(120, 0);

    auto res = client.Post("/truffle/transfer/" + reference_key, payload,
                           "application/octet-stream");
    if (!res) {
        return {Errc::transport,
                "peer unreachable: " + httplib::to_string(res.error())};
    }
    if (res->status != 200) {
        if (auto parsed = wire::parse_error_body(res->body)) {
            return *parsed;
        }
        return {wire::errc_for_status(res->status, Errc::transport),
                "peer answered status " + std::to_string(res->status)};
    }
    return {};
}

}  // namespace truffle
