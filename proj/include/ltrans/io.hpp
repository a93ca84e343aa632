// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ltrans/tensor.hpp"

namespace ltrans {

/// Grayscale images, each side*side values, tiled row-major into a binary
/// PPM (P6). Pixel = round(255 * clamp(v, 0, 1)) replicated over RGB.
/// `columns` = 0 picks ceil(sqrt(n)). Empty cells stay black.
void write_image_grid(std::span<const Tensor> images, std::size_t side, const std::filesystem::path& path,
                      std::size_t columns = 0);

/// Rasterizes 2-d points into a side x side image over [-extent, extent]^2,
/// y pointing up. Hit pixels are 1, the rest 0.
Tensor render_scatter(const Tensor& points, std::size_t side, double extent);

struct PpmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // width * height * 3
};

PpmImage read_ppm(const std::filesystem::path& path);

std::uint8_t quantize_pixel(double v);

struct CsvTable {
  std::vector<std::string> headers;
  std::vector<std::vector<double>> rows;
};

/// Header row plus numeric rows with 17 significant digits. Headers are
/// quoted when they contain a comma, quote or newline.
void write_csv(const CsvTable& table, const std::filesystem::path& path);
void write_csv(const std::vector<std::vector<double>>& rows, const std::vector<std::string>& headers,
               const std::filesystem::path& path);
/// Throws ParseError with the 1-based line number on malformed input.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

std::string format_double(double v);

}  // namespace ltrans
