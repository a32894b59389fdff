// Copyright 2026 The photocorr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Strict JSON field access with dotted-path error messages. Internal.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

#include "json.hpp"
#include "photocorr/error.hpp"

namespace photocorr::detail {

using Json = nlohmann::json;

/// InvalidInput tied to a config field; the message is "<path>: <reason>".
class FieldError : public InvalidInput {
   public:
    FieldError(std::string field, const std::string& reason)
        : InvalidInput(field + ": " + reason), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

   private:
    std::string field_;
};

[[noreturn]] inline void fail(const std::string& path, const std::string& message) {
    throw FieldError(path.empty() ? std::string("<root>") : path, message);
}

inline std::string child(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

inline std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

inline Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw InvalidInput(what + ": malformed JSON: " + e.what());
    }
}

inline void require_object(const Json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

/// Rejects keys outside `allowed`.
inline void check_keys(const Json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    require_object(j, path);
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) fail(child(path, key), "unknown key");
    }
}

inline const Json& require(const Json& j, const std::string& path, std::string_view key) {
    require_object(j, path);
    auto it = j.find(std::string(key));
    if (it == j.end()) fail(child(path, key), "missing required field");
    return *it;
}

inline double as_number(const Json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

inline std::uint64_t as_uint(const Json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d >= 0 && d == static_cast<double>(static_cast<std::uint64_t>(d)) && d < 1.8e19) {
            return static_cast<std::uint64_t>(d);
        }
    }
    fail(path, "expected a nonnegative integer");
}

inline std::string as_string(const Json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

inline bool as_bool(const Json& v, const std::string& path) {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
}

inline double number_or(const Json& j, const std::string& path, std::string_view key, double fallback) {
    auto it = j.find(std::string(key));
    return it == j.end() ? fallback : as_number(*it, child(path, key));
}

inline std::uint64_t uint_or(const Json& j, const std::string& path, std::string_view key, std::uint64_t fallback) {
    auto it = j.find(std::string(key));
    return it == j.end() ? fallback : as_uint(*it, child(path, key));
}

inline std::string string_or(const Json& j, const std::string& path, std::string_view key, std::string fallback) {
    auto it = j.find(std::string(key));
    return it == j.end() ? fallback : as_string(*it, child(path, key));
}

}  // namespace photocorr::detail
