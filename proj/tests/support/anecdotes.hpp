#pragma once

#include <random>
#include <string>
#include <vector>

#include "factscope/fact_engine.hpp"

namespace oracle {

struct Anecdote {
  factscope::FactResult result;
  std::string caption;
  factscope::MismatchKind expected;
};

// Trend results over sparse yearly series whose captions either cite years
// the result never refers to or reverse the trend's direction.
std::vector<Anecdote> anecdote_cases(std::mt19937_64& rng, std::size_t n);

}  // namespace oracle
