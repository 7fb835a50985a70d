#pragma once

#include <string>
#include <string_view>

#include "truffle/result.hpp"

namespace truffle {

/// Where a functionable input lives: inline with the request (direct),
/// in a bucket/object store, or in a key-value store.
enum class StorageKind { direct, object_store, kvs };

constexpr std::string_view to_string(StorageKind kind) {
    switch (kind) {
    case StorageKind::direct:       return "direct";
    case StorageKind::object_store: return "object_store";
    case StorageKind::kvs:          return "kvs";
    }
    return "unknown";
}

/// Parses the wire spelling.  Anything else fails with unsupported_storage.
Result<StorageKind> parse_storage_kind(std::string_view text);

/// bucket/object pair addressed inside an object store.
struct ObjectLocator {
    std::string bucket;
    std::string object_id;
};

/// Everything needed to locate one input payload.
///
/// locator carries the wire form: "bucket/object" for object stores, the key
/// for KVS, and is empty for direct (the bytes ride with the request).
struct StorageDescriptor {
    StorageKind kind = StorageKind::direct;
    std::string locator;
    std::string endpoint;
    std::string credentials_ref;

    /// Validates the shape for its kind: object_store needs "bucket/object"
    /// with both parts non-empty, kvs a non-empty key, direct an empty
    /// locator and endpoint.
    Result<void> validate() const;

    /// Splits locator into bucket and object id.  Only meaningful for
    /// object_store descriptors.
    Result<ObjectLocator> object_locator() const;
};

}  // namespace truffle
