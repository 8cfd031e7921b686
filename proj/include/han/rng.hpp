#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "han/matrix.hpp"

namespace han {

// Seeded generator with explicit bit-to-double conversion so results are
// identical across standard libraries (std::uniform_real_distribution is
// implementation-defined).
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive range.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    // Derived generator for an independent stream.
    Rng fork(uint64_t stream) {
        uint64_t z = engine_() + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 engine_;
};

inline void fill_uniform(Matrix& m, double lo, double hi, Rng& rng) {
    for (auto& x : m.values()) x = rng.uniform(lo, hi);
}

inline Matrix xavier_uniform(int rows, int cols, int fan_in, int fan_out, Rng& rng) {
    Matrix m(rows, cols);
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    fill_uniform(m, -limit, limit, rng);
    return m;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = rng.next_u64() % i;
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace han
