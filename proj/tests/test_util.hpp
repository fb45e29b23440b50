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
#include "bnnleak/dataset_io.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace bnnleak::testing {

inline std::string data_dir() { return BNNLEAK_DATA_DIR; }

inline std::vector<Image> mnist_first_per_class() {
    const std::string dir = data_dir();
    const auto labels = load_idx_labels(dir + "/t10k-labels-idx1-ubyte", 10000);
    const auto ids = first_index_per_class(labels);
    const auto all = load_idx_images(dir + "/t10k-images-idx3-ubyte", 100);
    std::vector<Image> out;
    for (size_t id : ids) {
        Image im = all[id];
        im.label = labels[id];
        out.push_back(im);
    }
    return out;
}

inline Image random_image(Rng &rng) {
    Image im;
    for (auto &p : im.pixels)
        p = uint8_t(rng.next() & 0xff);
    return im;
}

inline Grid random_grid(Rng &rng, double hi = 255.0) {
    Grid g;
    for (auto &v : g)
        v = hi * rng.uniform();
    return g;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
    const auto p = std::filesystem::temp_directory_path() / ("bnnleak-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace bnnleak::testing
