#pragma once

#include <span>

namespace factscope::numeric {

// Correctly rounded sum of the inputs (Shewchuk's partials algorithm), so the
// result is independent of input order.
double exact_sum(std::span<const double> values);

}  // namespace factscope::numeric
