#include "truffle/data_engine.hpp"

#include <utility>

#include <httplib.h>

#include "truffle/wire.hpp"

namespace truffle {

namespace {

// Long enough for a 128 MiB body on loopback with generous margin.
constexpr int kFetchTimeoutSec = 120;

httplib::Client make_client(const std::string& endpoint) {
    httplib::Client client("http://" + endpoint);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(kFetchTimeoutSec, 0);
    client.set_write_timeout(kFetchTimeoutSec, 0);
    return client;
}

Result<Payload> finish_get(httplib::Result& outcome, Errc missing_fallback) {
    if (!outcome) {
        return {Errc::transport, "backend unreachable: " + httplib::to_string(outcome.error())};
    }
    if (outcome->status == 200) {
        return std::move(outcome->body);
    }
    if (auto parsed = wire::parse_error_body(outcome->body)) {
        return *parsed;
    }
    return {wire::errc_for_status(outcome->status, missing_fallback),
            "backend answered status " + std::to_string(outcome->status)};
}

}  // namespace

Result<void> DataEngine::register_adapter(std::shared_ptr<StorageAdapter> adapter) {
    if (!adapter) {
        return {Errc::invalid_argument, "null adapter"};
    }
    const StorageKind kind = adapter->kind();
    if (adapters_.count(kind) != 0) {
        return {Errc::conflict,
                "adapter already registered for " + std::string(to_string(kind))};
    }
    adapters_.emplace(kind, std::move(adapter));
    return {};
}

Result<StorageAdapter*> DataEngine::resolve_adapter(StorageKind kind) const {
    auto it = adapters_.find(kind);
    if (it == adapters_.end()) {
        return {Errc::unsupported_storage,
                "no adapter for " + std::string(to_string(kind))};
    }
    return it->second.get();
}

Result<StorageAdapter*> DataEngine::resolve_adapter(const StorageDescriptor& descriptor) const {
    return resolve_adapter(descriptor.kind);
}

void DataEngine::prefetch(const StorageDescriptor& descriptor,
                          std::optional<Payload> inline_payload, const std::string& key,
                          Buffer& buffer) const {
    auto poison = [&](const Error& err) {
        // Best-effort: if the slot already resolved there is nothing to poison.
        (void)buffer.mark_failed(key, std::string(to_string(err.code)) + ": " + err.detail);
    };

    if (auto valid = descriptor.validate(); !valid.ok()) {
        poison(valid.error());
        return;
    }
    auto adapter = resolve_adapter(descriptor);
    if (!adapter.ok()) {
        poison(adapter.error());
        return;
    }
    auto fetched = adapter.value()->fetch(descriptor, std::move(inline_payload));
    if (!fetched.ok()) {
        poison(fetched.error());
        return;
    }
    if (auto put = buffer.put(key, std::move(fetched).value()); !put.ok()) {
        // Capacity or a lost race; either way readers must not hang.
        if (put.code() == Errc::capacity_exceeded) {
            poison(put.error());
        }
    }
}

DataEngine DataEngine::with_http_adapters(const CredentialStore* credentials) {
    DataEngine engine;
    // Fresh engine + three distinct kinds: registration cannot collide.
    (void)engine.register_adapter(std::make_shared<DirectAdapter>());
    (void)engine.register_adapter(std::make_shared<HttpKvsAdapter>());
    (void)engine.register_adapter(std::make_shared<HttpObjectStoreAdapter>(credentials));
    return engine;
}

Result<Payload> DirectAdapter::fetch(const StorageDescriptor&,
                                     std::optional<Payload> inline_payload) const {
    if (!inline_payload.has_value()) {
        return {Errc::invalid_argument, "direct fetch requires an inline payload"};
    }
    return std::move(*inline_payload);
}

Result<Payload> HttpKvsAdapter::fetch(const StorageDescriptor& descriptor,
                                      std::optional<Payload>) const {
    auto client = make_client(descriptor.endpoint);
    auto outcome = client.Get("/kvs/" + descriptor.locator);
    return finish_get(outcome, Errc::no_such_key);
}

Result<Payload> HttpObjectStoreAdapter::fetch(const StorageDescriptor& descriptor,
                                              std::optional<Payload>) const {
    auto split = descriptor.object_locator();
    if (!split.ok()) {
        return split.error();
    }
    auto client = make_client(descriptor.endpoint);
    httplib::Headers headers;
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
        headers.emplace("Authorization", *secret);
    }
    auto outcome =
        client.Get("/os/" + split.value().bucket + "/" + split.value().object_id, headers);
    return finish_get(outcome, Errc::no_such_object);
}

Result<Payload> fetch_object(const std::string& endpoint, const std::string& bucket,
                             const std::string& object_id,
                             const std::string& credentials_ref,
                             const CredentialStore* credentials) {
    StorageDescriptor descriptor{StorageKind::object_store, bucket + "/" + object_id,
                                 endpoint, credentials_ref};
    return HttpObjectStoreAdapter(credentials).fetch(descriptor, std::nullopt);
}

Result<Payload> fetch_kvs(const std::string& endpoint, const std::string& key) {
    StorageDescriptor descriptor{StorageKind::kvs, key, endpoint, {}};
    return HttpKvsAdapter().fetch(descriptor, std::nullopt);
}

}  // namespace truffle
