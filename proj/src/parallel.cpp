#include "miner/parallel.hpp"

namespace miner {
namespace {
std::atomic<std::size_t> g_threads{0};
}

void set_num_threads(std::size_t n) noexcept { g_threads.store(n); }

std::size_t num_threads() noexcept {
  const std::size_t n = g_threads.load();
  if (n != 0) return n;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace miner
