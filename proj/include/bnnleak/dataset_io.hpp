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

#include "bnnleak/common.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace bnnleak {

struct Image {
    std::array<uint8_t, kPixels> pixels{};
    int label = -1; ///< class index 0..9, or -1 when unknown

    uint8_t at(int row, int col) const { return pixels[row * kSide + col]; }
    Grid to_grid() const;
    bool operator==(const Image &) const = default;
};

constexpr uint32_t kIdxImageMagic = 0x00000803;
constexpr uint32_t kIdxLabelMagic = 0x00000801;

/// Reads the first `count` images of an IDX3 file.
std::vector<Image> load_idx_images(const std::string &path, size_t count);
/// Reads the first `count` labels of an IDX1 file.
std::vector<int> load_idx_labels(const std::string &path, size_t count);
/// Number of items declared in an IDX header.
size_t idx_item_count(const std::string &path);

/// Serialises images back to an IDX3 byte stream.
std::string encode_idx_images(const std::vector<Image> &images);

struct PixelPerturbation {
    enum class Kind { none, constant_background, lsb_flip };
    Kind kind = Kind::none;
    int background = 0;      ///< constant_background: replacement for zeros
    double probability = 0;  ///< lsb_flip: per-pixel flip probability
    int bits = 1;            ///< lsb_flip: 1 or 2 low bits
    uint64_t seed = 0;

    static PixelPerturbation background_value(int v);
    static PixelPerturbation flip(double p, int bits, uint64_t seed = 0);
    void validate() const;
    std::string describe() const;
};

/// Applies `p` to `image`. For lsb_flip every pixel is hit independently,
/// and with two bits both low bits are inverted together.
Image perturb(const Image &image, const PixelPerturbation &p);
/// Same as perturb() but draws from an explicit stream.
Image perturb(const Image &image, const PixelPerturbation &p, Rng &rng);

/// Binary PGM (P5, maxval 255). Values are rounded to the nearest integer
/// and must lie in [0, 255].
void write_pgm(const Grid &grid, const std::string &path);
void write_pgm(const Image &image, const std::string &path);
std::string encode_pgm(const Grid &grid);
Grid read_pgm(const std::string &path);

/// One representative image per class: the first occurrence of each label.
std::vector<size_t> first_index_per_class(const std::vector<int> &labels);

} // namespace bnnleak
