#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"
#include "spinbath/core.hpp"

namespace spinbath::json_util {

// Rejects keys not in `allowed`, so typos in config files fail loudly.
inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       std::string_view where) {
  if (!j.is_object()) throw InvalidArgument(std::string(where) + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || item.key() == a;
    if (!known) throw InvalidArgument(std::string(where) + ": unknown key '" + item.key() + "'");
  }
}

// Reads j[key] into value when present; type errors become InvalidArgument.
template <typename T>
void read(const nlohmann::json& j, const char* key, T& value) {
  if (!j.contains(key)) return;
  try {
    value = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace spinbath::json_util
