#include "truffle/sim/backend.hpp"

#include <atomic>
#include <thread>

#include <httplib.h>

#include "truffle/wire.hpp"

namespace truffle::sim {

Result<void> InMemoryKvs::check_auth(std::string_view token) const {
    if (!expected_token_.empty() && token != expected_token_) {
        return {Errc::auth_failure, "kvs rejected credentials"};
    }
    return {};
}

Result<Payload> InMemoryKvs::get(const std::string& key, std::string_view token) const {
    if (auto auth = check_auth(token); !auth.ok()) {
        return auth.error();
    }
    Payload copy;
    {
        std::lock_guard lock(mu_);
        auto it = values_.find(key);
        if (it == values_.end()) {
            return {Errc::no_such_key, "kvs has no key " + key};
        }
        copy = it->second;
    }
    clock_.sleep_nominal(profile_.nominal_ms(copy.size()));
    return copy;
}

Result<void> InMemoryKvs::put(const std::string& key, Payload value, std::string_view token) {
    if (auto auth = check_auth(token); !auth.ok()) {
        return auth.error();
    }
    clock_.sleep_nominal(profile_.nominal_ms(value.size()));
    std::lock_guard lock(mu_);
    values_[key] = std::move(value);
    return {};
}

void InMemoryKvs::clear() {
    std::lock_guard lock(mu_);
    values_.clear();
}

std::size_t InMemoryKvs::size() const {
    std::lock_guard lock(mu_);
    return values_.size();
}

Result<void> InMemoryObjectStore::check_auth(std::string_view token) const {
    if (!expected_token_.empty() && token != expected_token_) {
        return {Errc::auth_failure, "object store rejected credentials"};
    }
    return {};
}

Result<Payload> InMemoryObjectStore::get(const std::string& bucket,
                                         const std::string& object_id,
                                         std::string_view token) const {
    if (auto auth = check_auth(token); !auth.ok()) {
        return auth.error();
    }
    Payload copy;
    {
        std::lock_guard lock(mu_);
        auto bucket_it = buckets_.find(bucket);
        if (bucket_it == buckets_.end()) {
            return {Errc::no_such_bucket, "no bucket " + bucket};
        }
        auto object_it = bucket_it->second.find(object_id);
        if (object_it == bucket_it->second.end()) {
            return {Errc::no_such_object, "no object " + bucket + "/" + object_id};
        }
        copy = object_it->second;
    }
    clock_.sleep_nominal(profile_.nominal_ms(copy.size()));
    return copy;
}

Result<void> InMemoryObjectStore::put(const std::string& bucket,
                                      const std::string& object_id, Payload value,
                                      std::string_view token) {
    if (auto auth = check_auth(token); !auth.ok()) {
        return auth.error();
    }
    clock_.sleep_nominal(profile_.nominal_ms(value.size()));
    std::lock_guard lock(mu_);
    buckets_[bucket][object_id] = std::move(value);
    return {};
}

void InMemoryObjectStore::clear() {
    std::lock_guard lock(mu_);
    buckets_.clear();
}

std::size_t InMemoryObjectStore::size() const {
    std::lock_guard lock(mu_);
    std::size_t total = 0;
    for (const auto& [name, objects] : buckets_) {
        total += objects.size();
    }
    return total;
}

struct BackendServer::Impl {
    InMemoryKvs* kvs = nullptr;
    InMemoryObjectStore* object_store = nullptr;
    httplib::Server server;
    std::thread listener;
    std::atomic<int> port{0};
};

namespace {

void reply_error(httplib::Response& res, const Error& err) {
    res.status = wire::status_for(err.code);
    res.set_content(wire::error_body(err), "application/json");
}

std::string auth_token(const httplib::Request& req) {
    return req.get_header_value("Authorization");
}

}  // namespace

BackendServer::BackendServer(InMemoryKvs* kvs, InMemoryObjectStore* object_store)
    : impl_(std::make_unique<Impl>()) {
    impl_->kvs = kvs;
    impl_->object_store = object_store;

    auto& server = impl_->server;
    auto* impl = impl_.get();

    server.Get(R"(/kvs/([^/]+))", [impl](const httplib::Request& req, httplib::Response& res) {
        if (impl->kvs == nullptr) {
            reply_error(res, {Errc::not_found, "no kvs behind this endpoint"});
            return;
        }
        auto got = impl->kvs->get(req.matches[1], auth_token(req));
        if (!got.ok()) {
            reply_error(res, got.error());
            return;
        }
        res.set_content(std::move(got).value(), "application/octet-stream");
    });

    server.Put(R"(/kvs/([^/]+))", [impl](const httplib::Request& req, httplib::Response& res) {
        if (impl->kvs == nullptr) {
            reply_error(res, {Errc::not_found, "no kvs behind this endpoint"});
            return;
        }
        auto put = impl->kvs->put(req.matches[1], req.body, auth_token(req));
        if (!put.ok()) {
            reply_error(res, put.error());
            return;
        }
        res.status = 200;
    });

    server.Get(R"(/os/([^/]+)/(.+))", [impl](const httplib::Request& req, httplib::Response& res) {
        if (impl->object_store == nullptr) {
            reply_error(res, {Errc::not_found, "no object store behind this endpoint"});
            return;
        }
        auto got = impl->object_store->get(req.matches[1], req.matches[2], auth_token(req));
        if (!got.ok()) {
            reply_error(res, got.error());
            return;
        }
        res.set_content(std::move(got).value(), "application/octet-stream");
    });

    server.Put(R"(/os/([^/]+)/(.+))", [impl](const httplib::Request& req, httplib::Response& res) {
        if (impl->object_store == nullptr) {
            reply_error(res, {Errc::not_found, "no object store behind this endpoint"});
            return;
        }
        auto put = impl->object_store->put(req.matches[1], req.matches[2], req.body,
                                           auth_token(req));
        if (!put.ok()) {
            reply_error(res, put.error());
            return;
        }
        res.status = 200;
    });
}

BackendServer::~BackendServer() {
    stop();
}

Result<void> BackendServer::start(int port) {
    auto& server = impl_->server;
    int bound = port;
    if (port == 0) {
        bound = server.bind_to_any_port("127.0.0.1");
        if (bound < 0) {
            return {Errc::transport, "could not bind backend server"};
        }
    } else if (!server.bind_to_port("127.0.0.1", port)) {
        return {Errc::transport, "could not bind backend server"};
    }
    impl_->port = bound;
    impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
    server.wait_until_ready();
    return {};
}

void BackendServer::stop() {
    if (impl_->listener.joinable()) {
        impl_->server.stop();
        impl_->listener.join();
    }
}

int BackendServer::port() const {
    return impl_->port;
}

std::string BackendServer::endpoint() const {
    return "127.0.0.1:" + std::to_string(impl_->port.load());
}

}  // namespace truffle::sim
