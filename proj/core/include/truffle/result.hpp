#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace truffle {

/// Failure classes shared by every runtime module.  Transport-level HTTP
/// handlers map these onto status codes; in-process callers branch on them
/// directly.
enum class Errc {
    invalid_argument,
    conflict,
    not_found,
    timeout,
    fetch_failed,
    capacity_exceeded,
    unsupported_storage,
    no_such_bucket,
    no_such_object,
    no_such_key,
    auth_failure,
    scheduling_timeout,
    transport,
    platform_unreachable,
    platform_timeout,
    config_error,
};

constexpr std::string_view to_string(Errc code) {
    switch (code) {
    case Errc::invalid_argument:     return "invalid_argument";
    case Errc::conflict:             return "conflict";
    case Errc::not_found:            return "not_found";
    case Errc::timeout:              return "timeout";
    case Errc::fetch_failed:         return "fetch_failed";
    case Errc::capacity_exceeded:    return "capacity_exceeded";
    case Errc::unsupported_storage:  return "unsupported_storage";
    case Errc::no_such_bucket:       return "no_such_bucket";
    case Errc::no_such_object:       return "no_such_object";
    case Errc::no_such_key:          return "no_such_key";
    case Errc::auth_failure:         return "auth_failure";
    case Errc::scheduling_timeout:   return "scheduling_timeout";
    case Errc::transport:            return "transport";
    case Errc::platform_unreachable: return "platform_unreachable";
    case Errc::platform_timeout:     return "platform_timeout";
    case Errc::config_error:         return "config_error";
    }
    return "unknown";
}

struct Error {
    Errc code;
    std::string detail;
};

/// Minimal value-or-error carrier.  We deliberately avoid exceptions on the
/// data path: a missed buffer read or an unreachable peer is a normal
/// outcome, not an exceptional one.
template <typename T>
class [[nodiscard]] Result {
public:
    Result(T value) : state_(std::move(value)) {}
    Result(Error err) : state_(std::move(err)) {}
    Result(Errc code, std::string detail = {}) : state_(Error{code, std::move(detail)}) {}

    bool ok() const { return std::holds_alternative<T>(state_); }
    explicit operator bool() const { return ok(); }

    T& value() & { return std::get<T>(state_); }
    const T& value() const& { return std::get<T>(state_); }
    T&& value() && { return std::get<T>(std::move(state_)); }

    const Error& error() const { return std::get<Error>(state_); }
    Errc code() const { return error().code; }

private:
    std::variant<T, Error> state_;
};

template <>
class [[nodiscard]] Result<void> {
public:
    Result() = default;
    Result(Error err) : err_(std::move(err)), failed_(true) {}
    Result(Errc code, std::string detail = {}) : err_{code, std::move(detail)}, failed_(true) {}

    bool ok() const { return !failed_; }
    explicit operator bool() const { return ok(); }

    const Error& error() const { return err_; }
    Errc code() const { return err_.code; }

private:
    Error err_{};
    bool failed_ = false;
};

}  // namespace truffle
