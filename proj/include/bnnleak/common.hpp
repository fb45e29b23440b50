/*
 * SPDX-FileCopyrightText: <text>Copyright 2026 The bnnleak authors</text>
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bnnleak {

constexpr int kSide = 28;
constexpr int kPixels = kSide * kSide;

/// Row-major 28x28 grid of real values (traces, reconstructions, images).
using Grid = std::array<double, kPixels>;

enum class Errc {
    malformed_magic,
    dimension_mismatch,
    truncated_file,
    io_failure,
    precondition,
    shape_mismatch,
    odd_dimension,
    parse_failure,
    unsatisfiable_calibration,
    empty_list,
    length_mismatch,
    constant_image,
    window_too_large,
    missing_dataset,
    usage,
};

const char *errc_name(Errc code);

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string &what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what),
          code_(code) {}
    Errc code() const { return code_; }

  private:
    Errc code_;
};

/// Random stream with platform-independent distributions. The standard
/// library distributions are implementation defined, which would break
/// byte-exact replay across toolchains, so only the engine is borrowed.
class Rng {
  public:
    explicit Rng(uint64_t seed);
    /// Independent stream for (seed, stream, tag), e.g. one per run.
    static Rng derive(uint64_t seed, uint64_t stream, uint64_t tag = 0);

    uint64_t next() { return engine_(); }
    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
    /// Standard normal (Marsaglia polar method).
    double normal();

  private:
    explicit Rng(std::seed_seq &seq) : engine_(seq) {}
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// 64-bit FNV-1a; used for config hashes and derived seeds.
uint64_t fnv1a64(std::string_view data, uint64_t h = 0xcbf29ce484222325ULL);
/// 16 lowercase hex digits.
std::string hex64(uint64_t v);

/// Writes `data` to `path` through a sibling temporary file and a rename, so
/// readers never observe a partial file. Parent directories are created.
void write_file_atomic(const std::string &path, std::string_view data);
std::string read_file(const std::string &path);

} // namespace bnnleak
