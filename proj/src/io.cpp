#include "plrdiff/io.hpp"

#include "plrdiff/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace plrdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char *kOrder = "row-major-pixel-band-last";

template <class T> void put_le(std::vector<char> &buf, std::size_t at, T v) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  std::memcpy(buf.data() + at, bytes.data(), sizeof(T));
}

template <class T> T get_le(const std::vector<char> &buf, std::size_t at) {
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), buf.data() + at, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

json read_json(const fs::path &path) {
  std::ifstream is(path);
  if (!is) throw IoError(path.string() + ": cannot open");
  try {
    return json::parse(is);
  } catch (const json::exception &e) {
    throw IoError(path.string() + ": invalid JSON: " + e.what());
  }
}

} // namespace

fs::path sidecar_path(const fs::path &payload) {
  fs::path p = payload;
  p += ".json";
  return p;
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream os(path);
  if (!os) throw IoError(path.string() + ": cannot open for writing");
  os << text;
  if (!os) throw IoError(path.string() + ": write failed");
}

void save_array(const fs::path &path, const Tensor3 &x, DType dtype,
                std::optional<std::pair<double, double>> scale_range) {
  if (x.empty()) throw IoError(path.string() + ": refusing to save an empty tensor");
  const std::size_t width = dtype == DType::F64 ? 8 : 4;
  std::vector<char> buf(static_cast<std::size_t>(x.size()) * width);
  for (std::size_t i = 0; i < static_cast<std::size_t>(x.size()); ++i) {
    if (dtype == DType::F64) {
      put_le<double>(buf, i * width, x.data()[i]);
    } else {
      put_le<float>(buf, i * width, static_cast<float>(x.data()[i]));
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path.string() + ": cannot open for writing");
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw IoError(path.string() + ": write failed");

  json side;
  side["dtype"] = dtype == DType::F64 ? "f64" : "f32";
  side["shape"] = {x.height(), x.width(), x.bands()};
  side["order"] = kOrder;
  if (scale_range) side["scale_range"] = {scale_range->first, scale_range->second};
  write_text(sidecar_path(path), side.dump(2) + "\n");
}

Tensor3 load_array(const fs::path &path) {
  const fs::path side_path = sidecar_path(path);
  if (!fs::exists(side_path)) throw IoError(side_path.string() + ": sidecar missing");
  const json side = read_json(side_path);
  const std::string where = side_path.string() + ": ";

  if (!side.contains("dtype") || !side["dtype"].is_string()) throw IoError(where + "field 'dtype' missing");
  const std::string dt = side["dtype"];
  if (dt != "f32" && dt != "f64") throw IoError(where + "field 'dtype' must be f32 or f64, got " + dt);
  const std::size_t width = dt == "f64" ? 8 : 4;

  if (!side.contains("shape") || !side["shape"].is_array() || side["shape"].size() != 3) {
    throw IoError(where + "field 'shape' must be [H, W, S]");
  }
  std::array<Index, 3> shape{};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto &v = side["shape"][k];
    if (!v.is_number_integer() || v.get<long long>() <= 0) {
      throw IoError(where + "field 'shape' entries must be positive integers");
    }
    shape[k] = v.get<Index>();
  }
  if (side.contains("order") && side["order"] != kOrder) {
    throw IoError(where + "field 'order' must be " + kOrder);
  }

  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string() + ": payload missing");
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto count = static_cast<std::size_t>(shape[0] * shape[1] * shape[2]);
  if (buf.size() != count * width) {
    throw IoError(path.string() + ": payload has " + std::to_string(buf.size()) + " bytes, shape " +
                  "and dtype require " + std::to_string(count * width));
  }

  Tensor3 x(shape[0], shape[1], shape[2]);
  for (std::size_t i = 0; i < count; ++i) {
    const double v = width == 8 ? get_le<double>(buf, i * 8) : double(get_le<float>(buf, i * 4));
    if (!std::isfinite(v)) {
      throw IoError(path.string() + ": non-finite value at element " + std::to_string(i));
    }
    x.data()[i] = v;
  }

  if (side.contains("scale_range")) {
    const auto &r = side["scale_range"];
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
      throw IoError(where + "field 'scale_range' must be [lo, hi]");
    }
    const double lo = r[0], hi = r[1];
    if (!(hi > lo)) throw IoError(where + "field 'scale_range' needs hi > lo");
    x.vector().array() = (x.vector().array() - lo) / (hi - lo);
  }
  return x;
}

void export_band_image(const Tensor3 &x, Index band, const fs::path &path) {
  if (band < 0 || band >= x.bands()) {
    throw ParameterError("export_band_image: band " + std::to_string(band) + " out of range for " +
                         std::to_string(x.bands()) + " bands");
  }
  const Tensor3 img = x.band(band);
  const double lo = img.vector().minCoeff(), hi = img.vector().maxCoeff();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path.string() + ": cannot open for writing");
  os << "P5\n" << x.width() << ' ' << x.height() << "\n255\n";
  std::vector<unsigned char> pixels(static_cast<std::size_t>(img.size()));
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double v = hi > lo ? (img.data()[i] - lo) / (hi - lo) * 255.0 : 128.0;
    pixels[i] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0)));
  }
  os.write(reinterpret_cast<const char *>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!os) throw IoError(path.string() + ": write failed");

  json side;
  side["band"] = band;
  side["min"] = lo;
  side["max"] = hi;
  write_text(sidecar_path(path), side.dump(2) + "\n");
}

void save_matrix_csv(const fs::path &path, const Mat &m) {
  std::ostringstream os;
  os.precision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
    os << '\n';
  }
  write_text(path, os.str());
}

Mat load_matrix_csv(const fs::path &path) {
  std::ifstream is(path);
  if (!is) throw IoError(path.string() + ": cannot open");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception &) {
        throw IoError(path.string() + ": invalid number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError(path.string() + ": ragged rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + ": empty matrix");
  Mat m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

} // namespace plrdiff
