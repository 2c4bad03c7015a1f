#include "respscl/common.h"

#include <algorithm>
#include <cstdio>
#include <thread>
#include <vector>

namespace respscl {

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

uint64_t derive_seed(uint64_t master, const std::string& tag) {
  uint64_t h = fnv1a64(tag);
  h = fnv1a64(&master, sizeof(master), h);
  // splitmix64 finalizer to decorrelate nearby seeds
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

void parallel_for(int64_t n, int workers,
                  const std::function<void(int64_t, int64_t, int)>& fn) {
  if (n <= 0) {
    return;
  }
  workers = std::max(1, workers);
  const int used = static_cast<int>(std::min<int64_t>(workers, n));
  if (used == 1) {
    fn(0, n, 0);
    return;
  }
  const int64_t chunk = (n + used - 1) / used;
  std::vector<std::thread> pool;
  pool.reserve(used);
  for (int w = 0; w < used; ++w) {
    const int64_t lo = static_cast<int64_t>(w) * chunk;
    const int64_t hi = std::min<int64_t>(n, lo + chunk);
    if (lo >= hi) {
      break;
    }
    pool.emplace_back([&fn, lo, hi, w] { fn(lo, hi, w); });
  }
  for (auto& t : pool) {
    t.join();
  }
}

int default_workers() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 2 : static_cast<int>(hc);
}

}  // namespace respscl
