#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "cogflow/common.hpp"

namespace cogflow {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                                const std::string& ctx) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + ctx);
  }
}

inline const json& require(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing key '" + std::string(key) + "' in " + ctx);
  return *it;
}

}  // namespace detail
}  // namespace cogflow
