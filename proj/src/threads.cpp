#include "rcov/threads.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rcov {

static int read_thread_cap() {
#ifdef _OPENMP
  int hw = omp_get_max_threads();
#else
  int hw = 1;
#endif
  const char* env = std::getenv("RCOV_THREADS");
  if (env == nullptr) return hw;
  try {
    int n = std::stoi(env);
    if (n < 1) return 1;
    return n < hw ? n : hw;
  } catch (...) {
    return hw;
  }
}

int max_threads() {
  static const int cap = read_thread_cap();
  return cap;
}

}  // namespace rcov
