#pragma once

#include "plrdiff/tensor3.hpp"

#include <string>
#include <vector>

namespace plrdiff {

/// Ordered, strictly increasing 1-based band indices into an S-band image.
class BandSelection {
public:
  BandSelection(Index total_bands, std::vector<Index> indices);

  Index total_bands() const noexcept { return total_; }
  Index rank() const noexcept { return static_cast<Index>(indices_.size()); }
  /// 1-based, as reported to users.
  const std::vector<Index> &indices() const noexcept { return indices_; }
  /// 0-based storage offsets.
  std::vector<Index> zero_based() const;

  /// "(2,4,6)"
  std::string to_string() const;

  friend bool operator==(const BandSelection &, const BandSelection &) = default;

private:
  Index total_;
  std::vector<Index> indices_;
};

/// Like BandSelection but without the ordering requirement; used by the band
/// sweep, which must also accept duplicated or unordered triples.
struct BandList {
  Index total_bands = 0;
  std::vector<Index> indices;  ///< 1-based
};

/// Equal-interval selection i_j = ceil(S / (s + 1)) * j, j = 1..s.
BandSelection select_band_indices(Index total_bands, Index rank);

Tensor3 extract_base(const Tensor3 &y, const BandSelection &sel);
Tensor3 extract_base(const Tensor3 &y, const BandList &bands);

/// Least-squares coefficients E (S x s) with y ~ extract_base(y, sel) x_3 E.
Mat estimate_coefficients(const Tensor3 &y, const BandSelection &sel);
Mat estimate_coefficients(const Tensor3 &y, const BandList &bands);

/// a x_3 e.
Tensor3 reconstruct(const Tensor3 &a, const Mat &e);

} // namespace plrdiff
