// Copyright 2026 The layoutcorr Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <set>
#include <string>

#include "json.hpp"
#include "layoutcorr/common.hpp"

namespace layoutcorr {

// Reads optional fields from a JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw Error(Errc::kConfig, "[" + section_ + "] must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    known_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(Errc::kConfig, "[" + section_ + "] bad value for '" + key + "'");
    }
  }

  const nlohmann::json* sub(const char* key) {
    known_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!known_.count(it.key())) throw Error(Errc::kConfig, "[" + section_ + "] unknown key '" + it.key() + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string section_;
  std::set<std::string> known_;
};

}  // namespace layoutcorr
