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

#include "layoutcorr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace layoutcorr {

namespace {

constexpr char kMagic[4] = {'L', 'C', 'K', 'P'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& is, const std::string& path) : is_(is), path_(path) {}

  std::uint32_t u32() {
    unsigned char b[4];
    read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 26)) throw Error(Errc::kParse, path_ + ": string length " + std::to_string(n));
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  void read(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw Error(Errc::kParse, path_ + ": truncated checkpoint");
  }

 private:
  std::istream& is_;
  const std::string& path_;
};

CheckpointHeader read_header(Reader& r, const std::string& path) {
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(Errc::kParse, path + ": not a checkpoint file");
  const std::uint32_t ver = r.u32();
  if (ver != 1 && ver != kCheckpointVersion) {
    throw Error(Errc::kIncompatible, path + ": checkpoint format version " + std::to_string(ver));
  }
  CheckpointHeader h;
  h.kind = r.str();
  try {
    h.config = nlohmann::json::parse(r.str());
    if (ver >= 2) h.meta = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kParse, path + ": bad config header: " + e.what());
  }
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind, const nlohmann::json& config,
                     const nn::ParamSet<float>& params, const nlohmann::json& meta) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::kIo, "cannot write " + path);
  os.write(kMagic, 4);
  put_u32(os, kCheckpointVersion);
  put_str(os, kind);
  put_str(os, config.dump());
  put_str(os, meta.dump());
  put_u32(os, static_cast<std::uint32_t>(params.all().size()));
  for (const auto& p : params.all()) {
    put_str(os, p->name);
    put_u32(os, static_cast<std::uint32_t>(p->value.rows()));
    put_u32(os, static_cast<std::uint32_t>(p->value.cols()));
    static_assert(sizeof(float) == 4);
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, p->value.data() + i, 4);
      put_u32(os, bits);
    }
  }
  if (!os) throw Error(Errc::kIo, "write failed for " + path);
}

CheckpointHeader read_checkpoint_header(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::kIo, "cannot open checkpoint " + path);
  Reader r(is, path);
  return read_header(r, path);
}

CheckpointHeader load_checkpoint(const std::string& path, const std::string& expected_kind,
                                 nn::ParamSet<float>& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::kIo, "cannot open checkpoint " + path);
  Reader r(is, path);
  CheckpointHeader h = read_header(r, path);
  if (h.kind != expected_kind) {
    throw Error(Errc::kIncompatible, path + ": expected a " + expected_kind + " checkpoint, found " + h.kind);
  }
  const std::uint32_t count = r.u32();
  std::map<std::string, bool> seen;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.str();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    nn::Param<float>* p = params.find(name);
    if (!p) throw Error(Errc::kIncompatible, path + ": unknown tensor " + name);
    if (p->value.rows() != rows || p->value.cols() != cols) {
      throw Error(Errc::kIncompatible, path + ": shape mismatch for " + name);
    }
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const std::uint32_t bits = r.u32();
      std::memcpy(p->value.data() + i, &bits, 4);
    }
    seen[name] = true;
  }
  for (const auto& p : params.all()) {
    if (!seen.count(p->name)) throw Error(Errc::kIncompatible, path + ": missing tensor " + p->name);
  }
  return h;
}

}  // namespace layoutcorr
