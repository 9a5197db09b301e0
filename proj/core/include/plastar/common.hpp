#ifndef PLASTAR_COMMON_HPP
#define PLASTAR_COMMON_HPP

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace plastar {

using Element = std::int32_t;
using Tuple = std::vector<Element>;

// Distance sentinel for disconnected pairs; compares greater than every radius.
inline constexpr int kInfiniteDistance = std::numeric_limits<int>::max();

// Tolerance for comparing general [0,1] values; semantic 0/1 values are exact.
inline constexpr double kValueTolerance = 1e-12;

// Error taxonomy mirrored by the CLI exit codes: user/config errors exit 2,
// budget/resource errors exit 3, internal assertion failures exit 1.
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

// 64-bit mixer (splitmix64 finalizer). Used to derive independent seed
// streams from (root seed, stream ids) so that sampling is order-independent.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

// Uniform double in [0, 1) from a 64-bit hash value.
inline double unit_uniform(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Knobs shared by analyses and estimators. Defaults are desk-scale.
struct Config {
  std::vector<int> probes = {32, 64, 128, 256, 512};
  int samples = 200;                  // sampled worlds per estimation job
  std::uint64_t seed = 0;
  double epsilon = 0.05;              // asymptotic-equivalence deviation bound
  double stabilization_tol = 0.05;    // three-probe plateau tolerance
  double positivity_floor = 0.01;     // lower confidence edge for y-positivity
  double confidence = 0.95;           // two-sided level for Hoeffding radii
  double ct_tolerance = 1e-6;         // ct-limit stop threshold
  std::uint64_t ct_length_cap = 1ULL << 20;
  std::uint64_t enumeration_budget = 1ULL << 24;  // exact world enumeration
  std::uint64_t tuple_budget = 20'000'000;        // exhaustive tuple scans
  int canon_max_nonanchor = 64;                   // certificate size guard
  std::uint64_t canon_perm_budget = 1'000'000;    // certificate search guard
  int worlds_per_probe = 4;           // worlds scanned for realized sigma-types
  int max_anchors = 12;               // anchors inspected per world and type
  double equivalence_ceiling = 0.05;  // pass bound for the deviation fraction
  int gamma_boost = 0;                // widens the conditioning radius of the
                                      // elimination path (sensitivity probes)
  int jobs = 1;
};

std::string format_double(double v);

}  // namespace plastar

#endif  // PLASTAR_COMMON_HPP
