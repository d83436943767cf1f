/* Copyright 2026 The elkpp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace elkpp {

// Binary netpbm raster: P5 (channels 1) or P6 (channels 3), maxval 255.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved channels
};

Raster parse_netpbm(const std::string& bytes, const std::string& source = "<memory>");
std::string encode_netpbm(const Raster& raster);

Raster read_netpbm(const std::filesystem::path& path);
void write_netpbm(const std::filesystem::path& path, const Raster& raster);

}  // namespace elkpp
