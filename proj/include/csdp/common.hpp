#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace csdp {

// A probability vector over a finite alphabet.
using Dist = std::vector<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// A conditioning event (an observed action or observation) has zero prior
// probability under the current belief. Beliefs are never renormalized from
// zero; the caller is off-policy or the model is inconsistent.
class InconsistentObservation : public Error {
 public:
  using Error::Error;
};

class CombinatorialBlowup : public Error {
 public:
  CombinatorialBlowup(const std::string& what, std::uint64_t count)
      : Error(what), count(count) {}
  std::uint64_t count;
};

class MissingSuccessor : public Error {
 public:
  using Error::Error;
};

class ClosureViolation : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double final_span)
      : Error(what), final_span(final_span) {}
  double final_span;
};

class InfeasibleAction : public Error {
 public:
  using Error::Error;
};

class ModelFormatError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline void cat_into(std::ostringstream&) {}
template <class T, class... Rest>
void cat_into(std::ostringstream& os, T&& v, Rest&&... rest) {
  os << v;
  cat_into(os, std::forward<Rest>(rest)...);
}
}  // namespace detail

template <class... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  os.precision(17);
  detail::cat_into(os, std::forward<Args>(args)...);
  return os.str();
}

// Canonical integer coordinate on a uniform grid; used only for hashing and
// set membership of belief points, never for stored values.
inline std::int64_t quantize(double v, double grid) {
  return std::llround(v / grid);
}

inline void hash_mix(std::size_t& seed, std::size_t v) {
  seed ^= v + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2);
}

// Deterministic uniform in [0,1); avoids std::uniform_real_distribution,
// whose output is implementation-defined.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Samples an index from a probability vector by cumulative scan.
inline int sample_index(const Dist& p, std::mt19937_64& rng) {
  double r = uniform01(rng);
  double acc = 0.0;
  int last = -1;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    acc += p[k];
    last = static_cast<int>(k);
    if (r < acc) return last;
  }
  if (last < 0) throw Error("sample_index: distribution has no positive mass");
  return last;
}

}  // namespace csdp
