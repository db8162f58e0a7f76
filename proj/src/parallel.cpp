#include "hbsde/parallel.hpp"

#include <cstdlib>

namespace hbsde {

unsigned worker_count() {
  if (const char* env = std::getenv("HBSDE_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace hbsde
