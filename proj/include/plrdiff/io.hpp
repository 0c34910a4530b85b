#pragma once

#include "plrdiff/tensor3.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>

namespace plrdiff {

/**
 * Array files are a raw little-endian payload plus a JSON sidecar next to it
 * (`<payload>.json`):
 *
 *   {"dtype": "f32" | "f64",
 *    "shape": [H, W, S],
 *    "order": "row-major-pixel-band-last",
 *    "scale_range": [lo, hi]}          // optional
 *
 * Element (i, j, b) sits at offset (i*W + j)*S + b. When scale_range is
 * present, load_array maps values to (v - lo) / (hi - lo).
 */
enum class DType { F32, F64 };

std::filesystem::path sidecar_path(const std::filesystem::path &payload);

void save_array(const std::filesystem::path &path, const Tensor3 &x, DType dtype = DType::F64,
                std::optional<std::pair<double, double>> scale_range = std::nullopt);

/// Throws IoError naming the offending sidecar field or payload problem.
Tensor3 load_array(const std::filesystem::path &path);

/// 8-bit binary PGM of one band (0-based), min-max stretched; bounds go to `<path>.json`.
void export_band_image(const Tensor3 &x, Index band, const std::filesystem::path &path);

/// Comma-separated rows, full precision.
void save_matrix_csv(const std::filesystem::path &path, const Mat &m);
Mat load_matrix_csv(const std::filesystem::path &path);

void write_text(const std::filesystem::path &path, const std::string &text);

} // namespace plrdiff
