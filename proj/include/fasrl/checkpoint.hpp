// Copyright 2026 The fasrl Authors
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

// Versioned binary checkpoint. All integers little-endian; doubles are IEEE
// 754 binary64 stored as their little-endian bit pattern.
//
//   offset  field
//   0       magic "FASRLCKP" (8 bytes)
//   8       u32 format version (= 1)
//   12      u32 d, u32 h, u32 k, u32 V
//   28      V x { u32 byte length, token bytes }
//   ...     u32 lineage count, then { u32 tag length, tag bytes, u64 seed }
//   ...     5 arrays in order embeddings, context_weights, hidden_bias,
//           output_weights, output_bias; each { u64 count, count x f64 },
//           row-major
//   end-8   u64 FNV-1a-64 of every preceding byte
//
// Any mismatch (magic, version, dims, counts, checksum, trailing bytes) is a
// checkpoint error.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fasrl/error.hpp"
#include "fasrl/policy.hpp"
#include "fasrl/rng.hpp"

namespace fasrl {

inline constexpr std::string_view kCheckpointMagic = "FASRLCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  PolicyParams params;
  Vocabulary vocab;
  // Seeds that produced these parameters, e.g. {"root", 7}, {"init", ...}.
  std::vector<std::pair<std::string, std::uint64_t>> lineage;
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string& bytes() { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view b) : b_(b) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(b_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) {
      throw Error(ErrorCategory::kCheckpoint, "checkpoint truncated");
    }
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i]))
           << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  const auto& dm = ck.params.dims;
  if (dm.vocab != ck.vocab.size()) {
    throw Error(ErrorCategory::kDimension, "vocabulary size != params.vocab");
  }
  detail::ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(dm.d));
  w.u32(static_cast<std::uint32_t>(dm.h));
  w.u32(static_cast<std::uint32_t>(dm.k));
  w.u32(static_cast<std::uint32_t>(dm.vocab));
  for (const auto& t : ck.vocab.tokens()) w.str(t);
  w.u32(static_cast<std::uint32_t>(ck.lineage.size()));
  for (const auto& [tag, seed] : ck.lineage) {
    w.str(tag);
    w.u64(seed);
  }
  ck.params.for_each_array([&w](const std::vector<double>& a) {
    w.u64(a.size());
    for (double x : a) w.f64(x);
  });
  w.u64(fnv1a64(w.bytes()));
  return std::move(w.bytes());
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() + 8) {
    throw Error(ErrorCategory::kCheckpoint, "checkpoint truncated");
  }
  const auto body = bytes.substr(0, bytes.size() - 8);
  detail::ByteReader tail(bytes.substr(bytes.size() - 8));
  detail::ByteReader r(body);
  if (r.raw(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw Error(ErrorCategory::kCheckpoint, "bad checkpoint magic");
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCategory::kCheckpoint,
                "unsupported checkpoint version " + std::to_string(version));
  }
  if (tail.u64() != fnv1a64(body)) {
    throw Error(ErrorCategory::kCheckpoint,
                "checkpoint checksum mismatch (corrupt or truncated)");
  }
  PolicyDims dm;
  dm.d = r.u32();
  dm.h = r.u32();
  dm.k = r.u32();
  dm.vocab = r.u32();
  std::vector<std::string> toks;
  for (std::size_t i = 0; i < dm.vocab; ++i) toks.push_back(r.str());

  Checkpoint ck;
  try {
    ck.vocab = Vocabulary(std::move(toks));
  } catch (const Error& e) {
    throw Error(ErrorCategory::kCheckpoint, e.what());
  }
  const auto n_lineage = r.u32();
  for (std::uint32_t i = 0; i < n_lineage; ++i) {
    auto tag = r.str();
    ck.lineage.emplace_back(std::move(tag), r.u64());
  }
  ck.params = PolicyParams::zeros(dm);
  ck.params.for_each_array([&r](std::vector<double>& a) {
    if (r.u64() != a.size()) {
      throw Error(ErrorCategory::kCheckpoint, "array length mismatch");
    }
    for (double& x : a) x = r.f64();
  });
  if (r.remaining() != 0) {
    throw Error(ErrorCategory::kCheckpoint, "trailing bytes in checkpoint");
  }
  if (!ck.params.all_finite()) {
    throw Error(ErrorCategory::kCheckpoint, "non-finite parameter");
  }
  return ck;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCategory::kIo, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path,
                       std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCategory::kIo, "cannot write " + path.string());
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline void save_checkpoint(const std::filesystem::path& path,
                            const Checkpoint& ck) {
  write_file(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace fasrl
