#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace picone_lab {

/// Worker cap from PICONE_LAB_THREADS (unset or invalid: hardware concurrency).
inline std::size_t thread_cap() {
  std::size_t cap = std::max(1U, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PICONE_LAB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) cap = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return cap;
}

/// Runs fn(i) for i in [0, count) on up to thread_cap() threads. Each result
/// slot is written by exactly one task, so the output does not depend on
/// scheduling. The first exception (by index) is rethrown.
template <class Result, class Fn>
std::vector<Result> parallel_map(std::size_t count, Fn&& fn) {
  std::vector<Result> out(count);
  std::vector<std::exception_ptr> errors(count);
  const std::size_t workers = std::min(thread_cap(), count);
  const auto run = [&](std::size_t start) {
    for (std::size_t i = start; i < count; i += std::max<std::size_t>(workers, 1)) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace picone_lab
