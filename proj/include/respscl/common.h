#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

namespace respscl {

// FNV-1a 64-bit. Used for config fingerprints, cache keys and run hashes.
uint64_t fnv1a64(const void* data, size_t n,
                 uint64_t seed = 1469598103934665603ull);
uint64_t fnv1a64(const std::string& s);
std::string hex64(uint64_t v);

using Rng = std::mt19937_64;

// Derives a child seed from a master seed and a stream tag, so every
// stochastic component draws from its own reproducible stream.
uint64_t derive_seed(uint64_t master, const std::string& tag);

// Static-partition parallel map over [0, n). Chunk boundaries depend only on
// (n, workers); any reduction done in worker order is reproducible for a
// fixed worker count.
void parallel_for(int64_t n, int workers,
                  const std::function<void(int64_t lo, int64_t hi, int worker)>& fn);

int default_workers();

}  // namespace respscl
