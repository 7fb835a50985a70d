#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "truffle/buffer.hpp"
#include "truffle/result.hpp"
#include "truffle/storage.hpp"

namespace truffle {

/// Sidecar-local credential configuration.  Descriptors carry only an opaque
/// credentials_ref; the secret it names never travels in request metadata.
class CredentialStore {
public:
    void add(std::string ref, std::string secret) {
        secrets_[std::move(ref)] = std::move(secret);
    }

    std::optional<std::string> resolve(const std::string& ref) const {
        auto it = secrets_.find(ref);
        if (it == secrets_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

private:
    std::map<std::string, std::string> secrets_;
};

/// One way of getting bytes out of one storage kind.  Adapters are stateless
/// with respect to requests and shared freely across concurrent prefetches.
class StorageAdapter {
public:
    virtual ~StorageAdapter() = default;

    virtual StorageKind kind() const = 0;

    /// Produce the payload the descriptor points at.  Direct payloads ride
    /// with the request, so they arrive here as inline_payload, by value so
    /// large inputs move instead of copying.
    virtual Result<Payload> fetch(const StorageDescriptor& descriptor,
                                  std::optional<Payload> inline_payload) const = 0;
};

/// Routes descriptors to adapters and runs the prefetch that parks function
/// inputs in the local buffer while the platform works on starting the
/// function.
class DataEngine {
public:
    DataEngine() = default;

    /// At most one adapter per kind; a second registration conflicts.
    Result<void> register_adapter(std::shared_ptr<StorageAdapter> adapter);

    /// The adapter for this descriptor's kind, or unsupported_storage.
    /// Never falls back to a default adapter.
    Result<StorageAdapter*> resolve_adapter(const StorageDescriptor& descriptor) const;
    Result<StorageAdapter*> resolve_adapter(StorageKind kind) const;

    /// Fetch the descriptor's payload and publish it under `key`, which the
    /// caller has already announced.  On any failure the key is poisoned
    /// instead, so blocked readers fail fast with fetch_failed.  Runs
    /// synchronously; the ingress calls it from the invocation's concurrent
    /// prefetch path.
    void prefetch(const StorageDescriptor& descriptor,
                  std::optional<Payload> inline_payload, const std::string& key,
                  Buffer& buffer) const;

    /// An engine wired with the inline-direct adapter and HTTP clients for
    /// kvs and object-store endpoints.  `credentials` may be null when no
    /// backend enforces auth; the engine keeps the pointer.
    static DataEngine with_http_adapters(const CredentialStore* credentials);

private:
    std::map<StorageKind, std::shared_ptr<StorageAdapter>> adapters_;
};

/// Passes inline payloads through; fetch without one is an error.
class DirectAdapter final : public StorageAdapter {
public:
    StorageKind kind() const override { return StorageKind::direct; }
    Result<Payload> fetch(const StorageDescriptor& descriptor,
                          std::optional<Payload> inline_payload) const override;
};

/// GET /kvs/{key} against descriptor.endpoint.
class HttpKvsAdapter final : public StorageAdapter {
public:
    StorageKind kind() const override { return StorageKind::kvs; }
    Result<Payload> fetch(const StorageDescriptor& descriptor,
                          std::optional<Payload> inline_payload) const override;
};

/// GET /os/{bucket}/{object} against descriptor.endpoint, resolving
/// descriptor.credentials_ref through the sidecar-local store.
class HttpObjectStoreAdapter final : public StorageAdapter {
public:
    explicit HttpObjectStoreAdapter(const CredentialStore* credentials = nullptr)
        : credentials_(credentials) {}

    StorageKind kind() const override { return StorageKind::object_store; }
    Result<Payload> fetch(const StorageDescriptor& descriptor,
                          std::optional<Payload> inline_payload) const override;

private:
    const CredentialStore* credentials_;
};

/// One-shot wire fetches used by tests and tools.
Result<Payload> fetch_object(const std::string& endpoint, const std::string& bucket,
                             const std::string& object_id,
                             const std::string& credentials_ref,
                             const CredentialStore* credentials = nullptr);
Result<Payload> fetch_kvs(const std::string& endpoint, const std::string& key);

}  // namespace truffle
