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
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

using namespace bnnleak;
using bnnleak::testing::data_dir;
using bnnleak::testing::scratch_dir;

namespace {

std::string slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

template <class F> void expect_errc(Errc code, F &&f) {
    try {
        f();
        ADD_FAILURE() << "no error raised";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), code) << e.what();
    }
}

} // namespace

TEST(Common, RngIsDeterministicAndStreamsDiffer) {
    Rng a(42), b(42), c = Rng::derive(42, 1), d = Rng::derive(42, 2);
    for (int i = 0; i < 100; ++i)
        ASSERT_EQ(a.next(), b.next());
    EXPECT_NE(c.next(), d.next());
    Rng n(9);
    double s = 0, s2 = 0;
    const int count = 200000;
    for (int i = 0; i < count; ++i) {
        const double x = n.normal();
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / count, 0.0, 0.01);
    EXPECT_NEAR(s2 / count, 1.0, 0.02);
}

TEST(Common, Fnv1aKnownVectors) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Common, AtomicWriteCreatesDirectories) {
    const auto dir = scratch_dir("atomic");
    const std::string p = (dir / "x" / "y" / "f.txt").string();
    write_file_atomic(p, "hello");
    EXPECT_EQ(read_file(p), "hello");
    write_file_atomic(p, "bye");
    EXPECT_EQ(read_file(p), "bye");
}

TEST(DatasetIo, LoadsRequestedCount) {
    const auto imgs = load_idx_images(data_dir() + "/t10k-images-idx3-ubyte", 3);
    EXPECT_EQ(imgs.size(), 3u);
}

TEST(DatasetIo, FullTestSetMatchesByteLevelReader) {
    const std::string path = data_dir() + "/t10k-images-idx3-ubyte";
    const auto imgs = load_idx_images(path, 10000);
    ASSERT_EQ(imgs.size(), 10000u);
    const std::string raw = slurp(path);
    EXPECT_EQ(imgs[0].pixels[0], uint8_t(raw[16]));
    for (size_t k : {size_t(0), size_t(1), size_t(4321), size_t(9999)})
        for (int i = 0; i < kPixels; i += 37)
            ASSERT_EQ(imgs[k].pixels[i], uint8_t(raw[16 + k * kPixels + i]));
    EXPECT_EQ(idx_item_count(path), 10000u);
}

TEST(DatasetIo, IngestionIsLossless) {
    const std::string path = data_dir() + "/t10k-images-idx3-ubyte";
    const auto imgs = load_idx_images(path, 50);
    const std::string raw = slurp(path);
    const std::string enc = encode_idx_images(imgs);
    // Header differs only in the item count.
    EXPECT_EQ(enc.substr(16), raw.substr(16, 50 * kPixels));
    EXPECT_EQ(enc.substr(0, 4), raw.substr(0, 4));
    EXPECT_EQ(enc.substr(8, 8), raw.substr(8, 8));
}

TEST(DatasetIo, LabelsMatchByteLevelReader) {
    const std::string path = data_dir() + "/t10k-labels-idx1-ubyte";
    const auto one = load_idx_labels(path, 1);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_GE(one[0], 0);
    EXPECT_LE(one[0], 9);
    const auto ten = load_idx_labels(path, 10);
    const std::string raw = slurp(path);
    for (int i = 0; i < 10; ++i)
        EXPECT_EQ(ten[i], int(uint8_t(raw[8 + i])));
}

TEST(DatasetIo, Errors) {
    expect_errc(Errc::malformed_magic,
                [] { load_idx_images(data_dir() + "/t10k-labels-idx1-ubyte", 1); });
    expect_errc(Errc::malformed_magic,
                [] { load_idx_labels(data_dir() + "/t10k-images-idx3-ubyte", 1); });
    expect_errc(Errc::truncated_file,
                [] { load_idx_labels(data_dir() + "/t10k-labels-idx1-ubyte", 10001); });
    expect_errc(Errc::truncated_file,
                [] { load_idx_images(data_dir() + "/t10k-images-idx3-ubyte", 10001); });
    const auto dir = scratch_dir("idx");
    std::string bad = encode_idx_images({Image{}});
    bad[11] = 27; // rows = 27
    write_file_atomic((dir / "bad").string(), bad);
    expect_errc(Errc::dimension_mismatch, [&] { load_idx_images((dir / "bad").string(), 1); });
}

TEST(DatasetIo, FirstIndexPerClass) {
    const auto labels = load_idx_labels(data_dir() + "/t10k-labels-idx1-ubyte", 10000);
    EXPECT_EQ(first_index_per_class(labels),
              (std::vector<size_t>{3, 2, 1, 18, 4, 8, 11, 0, 61, 7}));
}

TEST(DatasetIo, FashionSubsetShape) {
    const std::string dir = data_dir();
    const auto labels = load_idx_labels(dir + "/fashion-subset-labels-idx1-ubyte", 100);
    for (int i = 0; i < 100; ++i)
        EXPECT_EQ(labels[i], i % 10);
    EXPECT_EQ(load_idx_images(dir + "/fashion-subset-images-idx3-ubyte", 100).size(), 100u);
}

TEST(Perturb, IdentityAndBackground) {
    Rng rng(1);
    const Image im = bnnleak::testing::random_image(rng);
    EXPECT_EQ(perturb(im, PixelPerturbation{}), im);
    const Image bg = perturb(Image{}, PixelPerturbation::background_value(30));
    for (auto p : bg.pixels)
        EXPECT_EQ(p, 30);
    // Nonzero pixels are untouched.
    const Image im2 = perturb(im, PixelPerturbation::background_value(30));
    for (int i = 0; i < kPixels; ++i)
        EXPECT_EQ(im2.pixels[i], im.pixels[i] == 0 ? 30 : im.pixels[i]);
}

TEST(Perturb, FlipProbabilities) {
    Rng rng(2);
    const Image im = bnnleak::testing::random_image(rng);
    const Image all1 = perturb(im, PixelPerturbation::flip(1.0, 1));
    const Image all2 = perturb(im, PixelPerturbation::flip(1.0, 2));
    EXPECT_EQ(perturb(im, PixelPerturbation::flip(0.0, 2)), im);
    for (int i = 0; i < kPixels; ++i) {
        EXPECT_EQ(all1.pixels[i], im.pixels[i] ^ 1);
        EXPECT_EQ(all2.pixels[i], im.pixels[i] ^ 3);
    }
    const auto p = PixelPerturbation::flip(0.4, 1, 77);
    EXPECT_EQ(perturb(im, p), perturb(im, p));
    int flipped = 0;
    const Image half = perturb(im, p);
    for (int i = 0; i < kPixels; ++i)
        flipped += half.pixels[i] != im.pixels[i];
    EXPECT_NEAR(flipped / double(kPixels), 0.4, 0.07);
    expect_errc(Errc::precondition, [&] { perturb(im, PixelPerturbation::flip(1.5, 1)); });
    expect_errc(Errc::precondition, [&] { perturb(im, PixelPerturbation::flip(0.5, 3)); });
}

TEST(Pgm, HeaderSizeAndRoundTrip) {
    const auto dir = scratch_dir("pgm");
    const std::string zero = (dir / "zero.pgm").string();
    write_pgm(Grid{}, zero);
    const std::string bytes = slurp(zero);
    EXPECT_EQ(bytes.size(), 13u + 784u);
    EXPECT_EQ(bytes.substr(0, 13), "P5\n28 28\n255\n");
    Rng rng(3);
    const Image im = bnnleak::testing::random_image(rng);
    write_pgm(im, (dir / "im.pgm").string());
    EXPECT_EQ(read_pgm((dir / "im.pgm").string()), im.to_grid());
}

TEST(Pgm, OutOfRangeRejectedBeforeWrite) {
    const auto dir = scratch_dir("pgm-bad");
    Grid g{};
    g[5] = 256;
    expect_errc(Errc::precondition, [&] { write_pgm(g, (dir / "bad.pgm").string()); });
    EXPECT_FALSE(std::filesystem::exists(dir / "bad.pgm"));
}
