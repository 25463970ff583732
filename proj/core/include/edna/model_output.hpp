#pragma once

#include <vector>

#include "edna/matrix.hpp"

namespace edna {

/// The triplet every model forward returns: logits (B x C), features
/// (B x F), and any secondary output matrices.
struct ModelOutput {
  Matrix logits;
  Matrix features;
  std::vector<Matrix> secondary;
};

} // namespace edna
