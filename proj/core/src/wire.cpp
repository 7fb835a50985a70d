#include "truffle/wire.hpp"

#include <nlohmann/json.hpp>

namespace truffle::wire {

int status_for(Errc code) {
    switch (code) {
    case Errc::invalid_argument:     return 400;
    case Errc::unsupported_storage:  return 400;
    case Errc::config_error:         return 400;
    case Errc::auth_failure:         return 401;
    case Errc::not_found:            return 404;
    case Errc::no_such_bucket:       return 404;
    case Errc::no_such_object:       return 404;
    case Errc::no_such_key:          return 404;
    case Errc::timeout:              return 408;
    case Errc::conflict:             return 409;
    case Errc::fetch_failed:         return 502;
    case Errc::transport:            return 502;
    case Errc::platform_unreachable: return 502;
    case Errc::scheduling_timeout:   return 504;
    case Errc::platform_timeout:     return 504;
    case Errc::capacity_exceeded:    return 507;
    }
    return 500;
}

Errc errc_for_status(int status, Errc fallback) {
    switch (status) {
    case 400: return Errc::invalid_argument;
    case 401: return Errc::auth_failure;
    case 404: return Errc::not_found;
    case 408: return Errc::timeout;
    case 409: return Errc::conflict;
    case 502: return Errc::transport;
    case 504: return Errc::platform_timeout;
    case 507: return Errc::capacity_exceeded;
    default:  return fallback;
    }
}

std::string error_body(const Error& err) {
    nlohmann::json doc{{"error", std::string(to_string(err.code))}, {"detail", err.detail}};
    return doc.dump();
}

std::optional<Error> parse_error_body(const std::string& body) {
    const auto doc = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (!doc.is_object() || !doc.contains("error") || !doc["error"].is_string()) {
        return std::nullopt;
    }
    const std::string name = doc["error"].get<std::string>();
    static constexpr Errc kAll[] = {
        Errc::invalid_argument,  Errc::conflict,       Errc::not_found,
        Errc::timeout,           Errc::fetch_failed,   Errc::capacity_exceeded,
        Errc::unsupported_storage, Errc::no_such_bucket, Errc::no_such_object,
        Errc::no_such_key,       Errc::auth_failure,   Errc::scheduling_timeout,
        Errc::transport,         Errc::platform_unreachable, Errc::platform_timeout,
        Errc::config_error,
    };
    for (Errc code : kAll) {
        if (name == to_string(code)) {
            std::string detail;
            if (doc.contains("detail") && doc["detail"].is_string()) {
                detail = doc["detail"].get<std::string>();
            }
            return Error{code, std::move(detail)};
        }
    }
    return std::nullopt;
}

}  // namespace truffle::wire
