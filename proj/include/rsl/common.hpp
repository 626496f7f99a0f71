#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Closed interval [lo, hi]; lo = -inf / hi = +inf give half lines.
struct Interval {
    double lo = -kInf;
    double hi = kInf;

    static Interval below(double e) { return {-kInf, e}; }
    static Interval centered(double e, double half_width) { return {e - half_width, e + half_width}; }

    bool empty() const { return lo > hi; }
    double length() const { return empty() ? 0.0 : hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
    Interval inflated(double m) const { return {lo - m, hi + m}; }
    Interval shifted(double t) const { return {lo + t, hi + t}; }
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Seeding. Per-sample seeds are a pure function of (master_seed, index) so
// results do not depend on scheduling or worker count.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master + 0x9e3779b97f4a7c15ULL * (index + 1));
}

/// Uniform double in [0,1) from the engine's raw 64-bit output. Avoids
/// std::uniform_real_distribution, whose stream is not pinned by the standard.
template <class Engine>
double u01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// FNV-1a, used for provenance hashes of serialized parameter sets.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

using GridIndex = std::array<int, 3>;

inline bool lex_less(const GridIndex& a, const GridIndex& b) {
    for (int i = 0; i < 3; ++i) {
        if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
}

/// Sup-norm distance between lattice points, |x| = max_i |x_i|.
inline int sup_dist(const GridIndex& a, const GridIndex& b, int d) {
    int m = 0;
    for (int i = 0; i < d; ++i) {
        int v = a[i] - b[i];
        if (v < 0) v = -v;
        if (v > m) m = v;
    }
    return m;
}

}  // namespace rsl
