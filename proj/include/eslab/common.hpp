#ifndef ESLAB_COMMON_HPP
#define ESLAB_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace eslab {

// Error taxonomy. Everything user-facing derives from Error so the CLI can
// map failures to exit codes in one place.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad arguments: dimension mismatches, invalid parameters, incompatible inputs.
class InputError : public Error {
public:
  using Error::Error;
};

// Structurally valid input that cannot be processed (all-zero grid, ...).
class DegenerateInputError : public InputError {
public:
  using InputError::InputError;
};

// Explicit time step violates the stability bound. Carries a usable step.
class StabilityError : public Error {
public:
  StabilityError(const std::string& what, double suggested_dt)
      : Error(what), suggested_dt(suggested_dt) {}
  double suggested_dt;
};

// Integration produced a non-finite state.
class BlowUpError : public Error {
public:
  BlowUpError(const std::string& what, long step) : Error(what), step(step) {}
  long step;
};

// Requested density support does not fit the target discretization.
class TruncationError : public Error {
public:
  using Error::Error;
};

// Problem size exceeds what an exact backend handles.
class ScaleError : public Error {
public:
  using Error::Error;
};

// Iterative solver failed to reach tolerance.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double final_violation)
      : Error(what), final_violation(final_violation) {}
  double final_violation;
};

// Too few samples/snapshots to evaluate the requested quantity.
class ResolutionError : public Error {
public:
  using Error::Error;
};

// Operation not defined for this density representation.
class UnsupportedError : public Error {
public:
  using Error::Error;
};

// Neumaier compensated summation. Quadratures and mass bookkeeping use this
// so reductions are reproducible and drift stays near the rounding floor.
class NeumaierSum {
public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Runs fn(begin, end) on contiguous index chunks. Chunk boundaries depend
// only on n and workers; callers must not accumulate across chunks if output
// bytes are required to be independent of the worker count.
inline void parallel_for_chunks(std::int64_t n, int workers,
                                const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  if (workers <= 1 || n < 2 * workers) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = w * chunk;
    const std::int64_t hi = std::min<std::int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

// Canonical float formatting for all text outputs; %.17g round-trips doubles,
// which the manifest reproducibility contract relies on.
std::string fmt_double(double v);

}  // namespace eslab

#endif
