/* Copyright (c) 2026 The MarrNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace marrnet {

/// Error hierarchy. Every library failure mode throws one of these so
/// callers (and the CLI) can map failures to stable error codes.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct MalformedFile : Error {
  using Error::Error;
};
struct NonFiniteValue : Error {
  using Error::Error;
};
struct DegenerateGrid : Error {
  using Error::Error;
};
struct InsufficientClasses : Error {
  using Error::Error;
};
struct NotEnoughClasses : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct EmptyGallery : Error {
  using Error::Error;
};
struct InvalidWindow : Error {
  using Error::Error;
};
struct NonFinite : Error {
  using Error::Error;
};
struct NonFiniteLoss : Error {
  using Error::Error;
};
struct InvalidConfig : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

/// The two sensing channels. M1 plays the Raman role, M2 the infrared role.
enum class Modality : int { M1 = 0, M2 = 1 };

inline Modality other(Modality m) {
  return m == Modality::M1 ? Modality::M2 : Modality::M1;
}

inline const char* to_string(Modality m) { return m == Modality::M1 ? "M1" : "M2"; }

inline Modality modality_from_string(const std::string& s) {
  if (s == "M1") return Modality::M1;
  if (s == "M2") return Modality::M2;
  throw InvalidConfig("unknown modality: " + s);
}

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed from a root seed, a purpose tag and an
/// index. All randomness in the toolkit flows through this so each component
/// (splits, init, augmentation, masks, ...) is reproducible on its own.
inline std::uint64_t derive_seed(std::uint64_t root, const std::string& tag,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ fnv1a(tag)) ^ splitmix64(index));
}

inline Rng make_rng(std::uint64_t root, const std::string& tag, std::uint64_t index = 0) {
  return Rng(derive_seed(root, tag, index));
}

}  // namespace marrnet
