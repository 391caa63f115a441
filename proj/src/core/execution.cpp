#include "execution.hpp"

#include <atomic>

#include "error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace r2u3d {
namespace {
std::atomic<int> g_threads{1};
std::atomic<ConvAlgorithm> g_conv{ConvAlgorithm::Im2col};
}  // namespace

ExecutionSettings execution_settings() { return {g_threads.load(), g_conv.load()}; }

void set_threads(int threads) {
  require(threads >= 1, ErrorCode::InvalidArgument, "thread count must be >= 1");
  g_threads = threads;
}

void set_deterministic(bool on) {
  if (on) {
    g_threads = 1;
    return;
  }
#ifdef _OPENMP
  g_threads = omp_get_max_threads();
#endif
}

bool deterministic() { return g_threads.load() == 1; }

void set_conv_algorithm(ConvAlgorithm algo) { g_conv = algo; }

int worker_count() { return g_threads.load(); }

}  // namespace r2u3d
