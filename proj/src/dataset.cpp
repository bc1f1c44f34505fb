#include "simex/dataset.hpp"

#include <string>

#include "simex/errors.hpp"

namespace simex {

void Dataset::validate() const {
  if (w.rows() != y.size())
    throw DimensionMismatch("response has " + std::to_string(y.size()) + " rows but W has " +
                            std::to_string(w.rows()));
  if (w.cols() < 2) throw DimensionMismatch("single-index model needs p >= 2 covariates");
  if (n() < p() + 2)
    throw DimensionMismatch("need n >= p + 2 observations, got n=" + std::to_string(n()));
  if (!y.allFinite() || !w.allFinite()) throw InvalidData("dataset contains non-finite values");
}

}  // namespace simex
