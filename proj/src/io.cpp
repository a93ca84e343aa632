// SPDX-License-Identifier: Apache-2.0
#include "ltrans/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ltrans/errors.hpp"

namespace ltrans {

namespace fs = std::filesystem;

namespace {

std::ofstream open_for_write(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string quote_field(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// Splits one logical record starting at `pos`; advances `pos` and `line`
// past the record terminator. Quoted fields may span lines.
std::vector<std::string> split_record(const std::string& text, std::size_t& pos, std::size_t& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  const std::size_t start_line = line;
  while (pos < text.size()) {
    const char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field += '"';
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      if (c == '\n') ++line;
      field += c;
      ++pos;
      continue;
    }
    if (c == '"') {
      if (!field.empty() || was_quoted) throw ParseError("stray quote inside a field", line);
      quoted = true;
      was_quoted = true;
      ++pos;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
      ++pos;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      ++line;
      fields.push_back(std::move(field));
      return fields;
    } else {
      if (was_quoted) throw ParseError("text after a closing quote", line);
      field += c;
      ++pos;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", start_line);
  fields.push_back(std::move(field));
  ++line;
  return fields;
}

}  // namespace

std::uint8_t quantize_pixel(double v) {
  const double clamped = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(255.0 * clamped));
}

Tensor render_scatter(const Tensor& points, std::size_t side, double extent) {
  if (points.rank() != 2 || points.cols() != 2) throw DimensionError("render_scatter expects [n x 2] points");
  if (side == 0 || !(extent > 0.0)) throw ContractError("render_scatter needs side > 0 and extent > 0");
  std::vector<double> px(side * side, 0.0);
  const double cell = 2.0 * extent / static_cast<double>(side);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double fx = std::floor((points.at(i, 0) + extent) / cell);
    const double fy = std::floor((extent - points.at(i, 1)) / cell);
    if (!(fx >= 0.0 && fy >= 0.0 && fx < static_cast<double>(side) && fy < static_cast<double>(side))) continue;
    px[static_cast<std::size_t>(fy) * side + static_cast<std::size_t>(fx)] = 1.0;
  }
  return Tensor({side * side}, std::move(px));
}

void write_image_grid(std::span<const Tensor> images, std::size_t side, const fs::path& path, std::size_t columns) {
  if (images.empty()) throw ContractError("write_image_grid needs at least one image");
  if (side == 0) throw ContractError("image side must be positive");
  for (const Tensor& img : images) {
    if (img.numel() != side * side) {
      throw DimensionError("image has " + std::to_string(img.numel()) + " values, expected side^2 = " +
                           std::to_string(side * side));
    }
  }
  const std::size_t n = images.size();
  if (columns == 0) columns = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  columns = std::min(columns, n);
  const std::size_t grid_rows = (n + columns - 1) / columns;
  const std::size_t width = columns * side;
  const std::size_t height = grid_rows * side;
  std::vector<std::uint8_t> rgb(width * height * 3, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t gx = (k % columns) * side;
    const std::size_t gy = (k / columns) * side;
    const auto px = images[k].data();
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t c = 0; c < side; ++c) {
        const std::uint8_t q = quantize_pixel(px[r * side + c]);
        const std::size_t at = ((gy + r) * width + gx + c) * 3;
        rgb[at] = rgb[at + 1] = rgb[at + 2] = q;
      }
    }
  }
  auto out = open_for_write(path);
  const std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

PpmImage read_ppm(const fs::path& path) {
  const std::string bytes = read_all(path);
  std::istringstream in(bytes);
  std::string magic;
  std::size_t maxval = 0;
  PpmImage img;
  in >> magic >> img.width >> img.height >> maxval;
  if (!in || magic != "P6" || maxval != 255) throw FormatError("not an 8-bit P6 image: " + path.string());
  in.get();  // single whitespace before the raster
  const auto offset = static_cast<std::size_t>(in.tellg());
  const std::size_t expected = img.width * img.height * 3;
  if (bytes.size() - offset != expected) throw FormatError("PPM raster size mismatch: " + path.string());
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return img;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_csv(const CsvTable& table, const fs::path& path) {
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.rows[i].size() != table.headers.size()) {
      throw ContractError("CSV row " + std::to_string(i) + " has " + std::to_string(table.rows[i].size()) +
                          " values for " + std::to_string(table.headers.size()) + " headers");
    }
  }
  std::string text;
  for (std::size_t j = 0; j < table.headers.size(); ++j) {
    if (j) text += ',';
    text += quote_field(table.headers[j]);
  }
  text += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) text += ',';
      text += format_double(row[j]);
    }
    text += '\n';
  }
  auto out = open_for_write(path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_csv(const std::vector<std::vector<double>>& rows, const std::vector<std::string>& headers,
               const fs::path& path) {
  write_csv(CsvTable{headers, rows}, path);
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::size_t pos = 0;
  std::size_t line = 1;
  if (text.empty()) throw ParseError("empty CSV", 1);
  table.headers = split_record(text, pos, line);
  while (pos < text.size()) {
    const std::size_t record_line = line;
    auto fields = split_record(text, pos, line);
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != table.headers.size()) {
      throw ParseError("expected " + std::to_string(table.headers.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       record_line);
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      double v = 0.0;
      const char* first = f.data();
      const char* last = f.data() + f.size();
      if (first != last && *first == '+') ++first;
      const auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc() || res.ptr != last) throw ParseError("not a number: '" + f + "'", record_line);
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_all(path)); }

}  // namespace ltrans
