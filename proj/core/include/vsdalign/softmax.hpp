#pragma once

#include "vsdalign/types.hpp"

namespace vsdalign {

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

/// Row-wise log-softmax, computed as x - max - log(sum(exp(x - max))).
Matrix log_softmax_rows(const Matrix& logits);

}  // namespace vsdalign
