#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace leafkit {

using Rng = std::mt19937_64;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

// Independent stream seed for a named sub-task, so serial and parallel runs
// draw identical numbers for the same (seed, key).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

}  // namespace leafkit
