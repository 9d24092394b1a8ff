#pragma once

#include <cstdint>
#include <string_view>

namespace lsm {

// Seed splitting: a stage seed is splitmix64(master ^ fnv1a64(stage_name)),
// optionally mixed again with an index (chain number, restart number, ...).
// Every stage can therefore be replayed from the master seed alone.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage);
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t index);

}  // namespace lsm
