#pragma once

#include <cstddef>

#include "permrl/nn/matrix.hpp"

namespace permrl::nn {

/// A batch of samples that each consist of `parts` equally sized vectors
/// (tiles of an image, frames of a sequence). Row b * parts + p holds part p
/// of sample b, so the whole batch can go through per-part layers at once.
struct PartBatch {
  std::size_t batch = 0;
  std::size_t parts = 0;
  Matrix values;

  std::size_t part_dim() const noexcept { return static_cast<std::size_t>(values.cols()); }
  auto part(std::size_t b, std::size_t p) { return values.row(static_cast<Eigen::Index>(b * parts + p)); }
  auto part(std::size_t b, std::size_t p) const { return values.row(static_cast<Eigen::Index>(b * parts + p)); }
};

}  // namespace permrl::nn
