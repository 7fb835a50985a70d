#include "truffle/storage.hpp"

namespace truffle {

Result<StorageKind> parse_storage_kind(std::string_view text) {
    if (text == "direct") return StorageKind::direct;
    if (text == "object_store") return StorageKind::object_store;
    if (text == "kvs") return StorageKind::kvs;
    return {Errc::unsupported_storage, "unknown storage kind: " + std::string(text)};
}

Result<void> StorageDescriptor::validate() const {
    switch (kind) {
    case StorageKind::direct:
        if (!locator.empty()) {
            return {Errc::invalid_argument, "direct descriptors carry no locator"};
        }
        if (!endpoint.empty()) {
            return {Errc::invalid_argument, "direct descriptors carry no endpoint"};
        }
        return {};
    case StorageKind::kvs:
        if (locator.empty()) {
            return {Errc::invalid_argument, "kvs descriptor needs a key"};
        }
        return {};
    case StorageKind::object_store: {
        const auto slash = locator.find('/');
        if (slash == std::string::npos || slash == 0 || slash + 1 == locator.size()) {
            return {Errc::invalid_argument,
                    "object_store locator must be bucket/object: " + locator};
        }
        return {};
    }
    }
    return {Errc::unsupported_storage, "unknown storage kind"};
}

Result<ObjectLocator> StorageDescriptor::object_locator() const {
    if (kind != StorageKind::object_store) {
        return {Errc::invalid_argument, "locator split only applies to object stores"};
    }
    if (auto valid = validate(); !valid.ok()) {
        return valid.error();
    }
    const auto slash = locator.find('/');
    return ObjectLocator{locator.substr(0, slash), locator.substr(slash + 1)};
}

}  // namespace truffle
