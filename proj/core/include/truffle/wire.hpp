#pragma once

#include <optional>
#include <string>

#include "truffle/result.hpp"

namespace truffle::wire {

// Request metadata headers understood by the sidecar and the platform.
inline constexpr char kHdrTarget[] = "X-Truffle-Target";
inline constexpr char kHdrStorageKind[] = "X-Truffle-Storage-Kind";
inline constexpr char kHdrLocator[] = "X-Truffle-Locator";
inline constexpr char kHdrEndpoint[] = "X-Truffle-Endpoint";
inline constexpr char kHdrCredentialsRef[] = "X-Truffle-Credentials-Ref";
inline constexpr char kHdrBuffer[] = "X-Truffle-Buffer";
inline constexpr char kHdrKey[] = "X-Truffle-Key";
inline constexpr char kHdrTrace[] = "X-Truffle-Trace";

/// HTTP status code carrying this failure class on the wire.
int status_for(Errc code);

/// Inverse mapping used by clients: prefer the error code named in the
/// response body; fall back to the status code, then to `fallback`.
Errc errc_for_status(int status, Errc fallback);

/// JSON error body: {"error": "<code>", "detail": "..."}.
std::string error_body(const Error& err);

/// Parses error_body output.  nullopt when the body is not such a document.
std::optional<Error> parse_error_body(const std::string& body);

}  // namespace truffle::wire
