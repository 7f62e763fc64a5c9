#include "avfusion/rng.hpp"

#include <vector>

namespace avf {

Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed),
                                   static_cast<std::uint32_t>(seed >> 32),
                                   static_cast<std::uint32_t>(index),
                                   static_cast<std::uint32_t>(index >> 32)};
  for (char c : name) words.push_back(static_cast<unsigned char>(c));
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace avf
