#include "plrdiff/subspace.hpp"

#include "plrdiff/error.hpp"

#include <sstream>

namespace plrdiff {

BandSelection::BandSelection(Index total_bands, std::vector<Index> indices)
  : total_(total_bands), indices_(std::move(indices)) {
  if (total_ < 1) throw ParameterError("band selection: total bands must be positive");
  if (indices_.empty()) throw ParameterError("band selection: at least one band is required");
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    const Index i = indices_[j];
    if (i < 1 || i > total_) {
      throw ParameterError("band selection: index " + std::to_string(i) + " outside [1, " +
                           std::to_string(total_) + "]");
    }
    if (j > 0 && i <= indices_[j - 1]) {
      throw ParameterError("band selection: indices must be strictly increasing");
    }
  }
}

std::vector<Index> BandSelection::zero_based() const {
  std::vector<Index> out;
  out.reserve(indices_.size());
  for (Index i : indices_) out.push_back(i - 1);
  return out;
}

std::string BandSelection::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t j = 0; j < indices_.size(); ++j) os << (j ? "," : "") << indices_[j];
  os << ')';
  return os.str();
}

BandSelection select_band_indices(Index total_bands, Index rank) {
  if (rank < 1) throw ParameterError("select_band_indices: rank must be >= 1");
  if (total_bands < 1) throw ParameterError("select_band_indices: total bands must be >= 1");
  const Index step = (total_bands + rank) / (rank + 1);  // ceil(S / (s + 1))
  std::vector<Index> idx;
  for (Index j = 1; j <= rank; ++j) {
    const Index i = step * j;
    if (i > total_bands) {
      throw ParameterError("select_band_indices: j = " + std::to_string(j) + " gives band " +
                           std::to_string(i) + " > S = " + std::to_string(total_bands));
    }
    idx.push_back(i);
  }
  return BandSelection(total_bands, std::move(idx));
}

Tensor3 extract_base(const Tensor3 &y, const BandList &bands) {
  if (bands.total_bands != y.bands()) {
    throw ShapeError("extract_base: selection is for " + std::to_string(bands.total_bands) +
                     " bands, image has " + std::to_string(y.bands()));
  }
  if (bands.indices.empty()) throw ParameterError("extract_base: empty band list");
  const auto s = static_cast<Index>(bands.indices.size());
  for (Index i : bands.indices) {
    if (i < 1 || i > y.bands()) {
      throw ParameterError("extract_base: band " + std::to_string(i) + " out of range");
    }
  }
  Tensor3 out(y.height(), y.width(), s);
  for (Index p = 0; p < y.pixels(); ++p) {
    for (Index j = 0; j < s; ++j) {
      out.data()[p * s + j] = y.data()[p * y.bands() + bands.indices[j] - 1];
    }
  }
  return out;
}

Tensor3 extract_base(const Tensor3 &y, const BandSelection &sel) {
  return extract_base(y, BandList{sel.total_bands(), sel.indices()});
}

Mat estimate_coefficients(const Tensor3 &y, const BandList &bands) {
  const Tensor3 base = extract_base(y, bands);
  return lstsq_rows(y.matrix(), base.matrix());
}

Mat estimate_coefficients(const Tensor3 &y, const BandSelection &sel) {
  return estimate_coefficients(y, BandList{sel.total_bands(), sel.indices()});
}

Tensor3 reconstruct(const Tensor3 &a, const Mat &e) { return mode3_mul(a, e); }

} // namespace plrdiff
