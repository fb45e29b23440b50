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

#include "bnnleak/dataset_io.hpp"

#include <cmath>
#include <sstream>

namespace bnnleak {

namespace {

uint32_t be32(const std::string &buf, size_t off) {
    return uint32_t(uint8_t(buf[off])) << 24 | uint32_t(uint8_t(buf[off + 1])) << 16 |
           uint32_t(uint8_t(buf[off + 2])) << 8 | uint32_t(uint8_t(buf[off + 3]));
}

void put_be32(std::string &out, uint32_t v) {
    for (int s = 24; s >= 0; s -= 8)
        out.push_back(char((v >> s) & 0xff));
}

std::string read_idx(const std::string &path, size_t min_size) {
    std::string buf;
    try {
        buf = read_file(path);
    } catch (const Error &) {
        throw Error(Errc::missing_dataset, "cannot read " + path);
    }
    if (buf.size() < min_size)
        throw Error(Errc::truncated_file, path + " is shorter than its header");
    return buf;
}

} // namespace

Grid Image::to_grid() const {
    Grid g;
    for (int i = 0; i < kPixels; ++i)
        g[i] = pixels[i];
    return g;
}

size_t idx_item_count(const std::string &path) {
    std::string buf = read_idx(path, 8);
    return be32(buf, 4);
}

std::vector<Image> load_idx_images(const std::string &path, size_t count) {
    if (count == 0)
        throw Error(Errc::precondition, "image count must be positive");
    const std::string buf = read_idx(path, 16);
    if (be32(buf, 0) != kIdxImageMagic)
        throw Error(Errc::malformed_magic, path + " is not an IDX image file");
    const uint32_t n = be32(buf, 4), rows = be32(buf, 8), cols = be32(buf, 12);
    if (rows != kSide || cols != kSide)
        throw Error(Errc::dimension_mismatch,
                    path + " holds " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " images");
    if (count > n || buf.size() < 16 + count * kPixels)
        throw Error(Errc::truncated_file,
                    path + " holds fewer than " + std::to_string(count) + " images");
    std::vector<Image> images(count);
    for (size_t k = 0; k < count; ++k)
        for (int i = 0; i < kPixels; ++i)
            images[k].pixels[i] = uint8_t(buf[16 + k * kPixels + i]);
    return images;
}

std::vector<int> load_idx_labels(const std::string &path, size_t count) {
    if (count == 0)
        throw Error(Errc::precondition, "label count must be positive");
    const std::string buf = read_idx(path, 8);
    if (be32(buf, 0) != kIdxLabelMagic)
        throw Error(Errc::malformed_magic, path + " is not an IDX label file");
    if (count > be32(buf, 4) || buf.size() < 8 + count)
        throw Error(Errc::truncated_file,
                    path + " holds fewer than " + std::to_string(count) + " labels");
    std::vector<int> labels(count);
    for (size_t k = 0; k < count; ++k) {
        labels[k] = uint8_t(buf[8 + k]);
        if (labels[k] > 9)
            throw Error(Errc::parse_failure, "label out of range in " + path);
    }
    return labels;
}

std::string encode_idx_images(const std::vector<Image> &images) {
    std::string out;
    out.reserve(16 + images.size() * kPixels);
    put_be32(out, kIdxImageMagic);
    put_be32(out, uint32_t(images.size()));
    put_be32(out, kSide);
    put_be32(out, kSide);
    for (const Image &im : images)
        out.append(reinterpret_cast<const char *>(im.pixels.data()), kPixels);
    return out;
}

PixelPerturbation PixelPerturbation::background_value(int v) {
    PixelPerturbation p;
    p.kind = Kind::constant_background;
    p.background = v;
    return p;
}

PixelPerturbation PixelPerturbation::flip(double prob, int nbits, uint64_t seed) {
    PixelPerturbation p;
    p.kind = Kind::lsb_flip;
    p.probability = prob;
    p.bits = nbits;
    p.seed = seed;
    return p;
}

void PixelPerturbation::validate() const {
    if (background < 0 || background > 255)
        throw Error(Errc::precondition, "background value outside [0,255]");
    if (!(probability >= 0.0 && probability <= 1.0))
        throw Error(Errc::precondition, "flip probability outside [0,1]");
    if (bits != 1 && bits != 2)
        throw Error(Errc::precondition, "flip bit count must be 1 or 2");
}

std::string PixelPerturbation::describe() const {
    std::ostringstream s;
    switch (kind) {
    case Kind::none: s << "none"; break;
    case Kind::constant_background: s << "background=" << background; break;
    case Kind::lsb_flip: s << "flip p=" << probability << " bits=" << bits; break;
    }
    return s.str();
}

Image perturb(const Image &image, const PixelPerturbation &p) {
    Rng rng(p.seed);
    return perturb(image, p, rng);
}

Image perturb(const Image &image, const PixelPerturbation &p, Rng &rng) {
    p.validate();
    Image out = image;
    switch (p.kind) {
    case PixelPerturbation::Kind::none:
        break;
    case PixelPerturbation::Kind::constant_background:
        for (auto &px : out.pixels)
            if (px == 0)
                px = uint8_t(p.background);
        break;
    case PixelPerturbation::Kind::lsb_flip: {
        const uint8_t mask = p.bits == 2 ? 0x3 : 0x1;
        for (auto &px : out.pixels)
            if (rng.uniform() < p.probability)
                px ^= mask;
        break;
    }
    }
    return out;
}

std::string encode_pgm(const Grid &grid) {
    std::string out = "P5\n28 28\n255\n";
    out.reserve(out.size() + kPixels);
    for (double v : grid) {
        if (!(v >= 0.0 && v <= 255.0))
            throw Error(Errc::precondition, "PGM value outside [0,255]");
        out.push_back(char(uint8_t(std::lround(v))));
    }
    return out;
}

void write_pgm(const Grid &grid, const std::string &path) {
    write_file_atomic(path, encode_pgm(grid));
}

void write_pgm(const Image &image, const std::string &path) {
    write_pgm(image.to_grid(), path);
}

Grid read_pgm(const std::string &path) {
    const std::string buf = read_file(path);
    std::istringstream in(buf);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic;
    // Skip comment lines between header tokens.
    auto next_int = [&](int &v) {
        in >> std::ws;
        while (in.peek() == '#') {
            std::string line;
            std::getline(in, line);
            in >> std::ws;
        }
        in >> v;
    };
    next_int(w);
    next_int(h);
    next_int(maxval);
    if (magic != "P5" || !in)
        throw Error(Errc::parse_failure, path + " is not a binary PGM");
    if (w != kSide || h != kSide)
        throw Error(Errc::dimension_mismatch, path + " is not 28x28");
    if (maxval != 255)
        throw Error(Errc::parse_failure, path + " has maxval other than 255");
    in.get(); // single whitespace before the raster
    const size_t off = size_t(in.tellg());
    if (buf.size() < off + kPixels)
        throw Error(Errc::truncated_file, path + " raster is truncated");
    Grid g;
    for (int i = 0; i < kPixels; ++i)
        g[i] = uint8_t(buf[off + i]);
    return g;
}

std::vector<size_t> first_index_per_class(const std::vector<int> &labels) {
    std::vector<size_t> idx;
    for (int c = 0; c <= 9; ++c)
        for (size_t k = 0; k < labels.size(); ++k)
            if (labels[k] == c) {
                idx.push_back(k);
                break;
            }
    return idx;
}

} // namespace bnnleak
