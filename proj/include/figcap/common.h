// Copyright 2026 The figcap Authors.
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

#ifndef FIGCAP_COMMON_H_
#define FIGCAP_COMMON_H_

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace figcap {

// Stable 64-bit FNV-1a. std::hash is not stable across standard libraries,
// and every seeded artifact (mock responses, config hashes) must be.
inline uint64_t fnv1a(std::string_view data,
                      uint64_t basis = 0xcbf29ce484222325ULL) {
  uint64_t h = basis;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Combines parts into one hash; part boundaries are significant.
inline uint64_t hash_parts(uint64_t seed,
                           std::initializer_list<std::string_view> parts) {
  uint64_t h = mix64(seed);
  for (std::string_view p : parts) {
    h = mix64(h ^ fnv1a(p));
    h = mix64(h ^ p.size());
  }
  return h;
}

// Maps a hash to (0, 1].
inline double unit_interval(uint64_t h) {
  return static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
}

// mt19937_64 is fully specified by the standard, the std distributions are
// not; these helpers keep seeded runs identical across toolchains.
using Rng = std::mt19937_64;

inline size_t uniform_index(Rng& rng, size_t n) {
  return n == 0 ? 0 : static_cast<size_t>(rng() % n);
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

// Draws min(k, n) distinct indices from [0, n) in sampled order.
std::vector<size_t> sample_indices(size_t n, size_t k, Rng& rng);

std::string trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
bool starts_with_icase(std::string_view s, std::string_view prefix);
std::string to_lower_ascii(std::string_view s);
std::string hex64(uint64_t v);

// Replaces every "{name}" with vars[name]; unknown placeholders are left
// untouched so editable prompt files can carry literal braces.
std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string, std::string>>&
                           vars);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace figcap

#endif  // FIGCAP_COMMON_H_
