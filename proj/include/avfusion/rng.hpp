#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace avf {

using Rng = std::mt19937_64;

// Independent generator for a named purpose ("data", "init", "dropout",
// "masking", "trials", ...) derived from one run seed.
Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

// Uniform in [0, 1) from the top 53 bits.
double uniform01(Rng& rng);

}  // namespace avf
