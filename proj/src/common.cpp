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

#include "bnnleak/common.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace bnnleak {

const char *errc_name(Errc code) {
    switch (code) {
    case Errc::malformed_magic: return "malformed-magic";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::truncated_file: return "truncated-file";
    case Errc::io_failure: return "io-failure";
    case Errc::precondition: return "precondition-violation";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::odd_dimension: return "odd-dimension";
    case Errc::parse_failure: return "parse-failure";
    case Errc::unsatisfiable_calibration: return "unsatisfiable-calibration";
    case Errc::empty_list: return "empty-list";
    case Errc::length_mismatch: return "length-mismatch";
    case Errc::constant_image: return "constant-image";
    case Errc::window_too_large: return "window-too-large";
    case Errc::missing_dataset: return "missing-dataset";
    case Errc::usage: return "usage";
    }
    return "unknown";
}

Rng::Rng(uint64_t seed) {
    std::seed_seq seq{uint32_t(seed), uint32_t(seed >> 32)};
    engine_.seed(seq);
}

Rng Rng::derive(uint64_t seed, uint64_t stream, uint64_t tag) {
    std::seed_seq seq{uint32_t(seed),   uint32_t(seed >> 32),
                      uint32_t(stream), uint32_t(stream >> 32),
                      uint32_t(tag),    uint32_t(tag >> 32)};
    return Rng(seq);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

uint64_t fnv1a64(std::string_view data, uint64_t h) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(uint64_t v) {
    static const char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4)
        s[i] = digits[v & 0xf];
    return s;
}

void write_file_atomic(const std::string &path, std::string_view data) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    std::error_code ec;
    if (target.has_parent_path())
        fs::create_directories(target.parent_path(), ec);
    if (ec)
        throw Error(Errc::io_failure, "cannot create directory for " + path);
    // Unique per target and thread; cells never share a target path.
    std::ostringstream tmpname;
    tmpname << path << ".tmp." << std::hash<std::string>{}(path) << '.'
            << std::hash<std::thread::id>{}(std::this_thread::get_id());
    const std::string tmp = tmpname.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(Errc::io_failure, "cannot open " + tmp);
        out.write(data.data(), std::streamsize(data.size()));
        if (!out)
            throw Error(Errc::io_failure, "write failed for " + tmp);
    }
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(Errc::io_failure, "cannot rename onto " + path);
    }
}

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::io_failure, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace bnnleak
