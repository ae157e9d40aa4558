#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace elc {

using Rng = std::mt19937_64;

// Mixes a base seed with a list of integer tags (task, class, sample index,
// ...) so independent streams never share state.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  return Rng(derive_seed(base, tags));
}

// Standard normal draw via Box-Muller on the raw engine output. Unlike
// std::normal_distribution the sequence is fixed across standard libraries.
double standard_normal(Rng& rng);

// Uniform draw in [0, 1).
double uniform01(Rng& rng);

}  // namespace elc
