#pragma once

#include <memory>

#include "truffle/data_engine.hpp"
#include "truffle/sim/backend.hpp"

namespace truffle::sim {

/// In-process counterparts of the HTTP adapters.  Simulated nodes talk to
/// their backends through these so that the only cost on a measured fetch is
/// the profile-driven charge, not loopback wire time; the HTTP routes expose
/// the identical service objects for wire-level clients.

class ServiceKvsAdapter final : public StorageAdapter {
public:
    explicit ServiceKvsAdapter(const InMemoryKvs* kvs) : kvs_(kvs) {}

    StorageKind kind() const override { return StorageKind::kvs; }

    Result<Payload> fetch(const StorageDescriptor& descriptor,
                          std::optional<Payload>) const override {
        return kvs_->get(descriptor.locator);
    }

private:
    const InMemoryKvs* kvs_;
};

class ServiceObjectStoreAdapter final : public StorageAdapter {
public:
    ServiceObjectStoreAdapter(const InMemoryObjectStore* store,
                              const CredentialStore* credentials)
        : store_(store), credentials_(credentials) {}

    StorageKind kind() const override { return StorageKind::object_store; }

    Result<Payload> fetch(const StorageDescriptor& descriptor,
                          std::optional<Payload>) const override {
        auto split = descriptor.object_locator();
        if (!split.ok()) {
            return split.error();
        }
        std::string token;
        if (!descriptor.credentials_ref.empty()) {
            if (credentials_ == nullptr) {
                return {Errc::auth_failure,
                        "no credential store to resolve " + descriptor.credentials_ref};
            }
            auto secret = credentials_->resolve(descriptor.credentials_ref);
            if (!secret.has_value()) {
                return {Errc::auth_failure,
                        "unknown credentials_ref " + descriptor.credentials_ref};
            }
            token = *secret;
        }
        return store_->get(split.value().bucket, split.value().object_id, token);
    }

private:
    const InMemoryObjectStore* store_;
    const CredentialStore* credentials_;
};

/// Engine wired for a simulated node: inline-direct plus in-process backend
/// adapters.
inline DataEngine make_service_engine(const InMemoryKvs* kvs,
                                      const InMemoryObjectStore* object_store,
                                      const CredentialStore* credentials) {
    DataEngine engine;
    // Fresh engine + three distinct kinds: registration cannot collide.
    (void)engine.register_adapter(std::make_shared<DirectAdapter>());
    (void)engine.register_adapter(std::make_shared<ServiceKvsAdapter>(kvs));
    (void)engine.register_adapter(
        std::make_shared<ServiceObjectStoreAdapter>(object_store, credentials));
    return engine;
}

}  // namespace truffle::sim
