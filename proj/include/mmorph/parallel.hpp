#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "mmorph/error.hpp"

namespace mmorph {

/// Worker count: explicit value if positive, else MMORPH_THREADS, else 1.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (requested < 0) throw UsageError("threads must be >= 1");
  const char* env = std::getenv("MMORPH_THREADS");
  if (!env || !*env) return 1;
  try {
    std::size_t pos = 0;
    const int n = std::stoi(env, &pos);
    if (pos != std::string(env).size() || n < 1) throw UsageError("");
    return n;
  } catch (const std::exception&) {
    throw UsageError(std::string("invalid MMORPH_THREADS value '") + env + "'");
  }
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must be
/// independent. If any item throws, the exception of the lowest failing
/// index is rethrown after all workers finish.
template <class F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  const auto workers = static_cast<std::size_t>(std::clamp<long long>(threads, 1, static_cast<long long>(std::max<std::size_t>(n, 1))));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace mmorph
