#pragma once

// Seeded RNG built on mt19937_64 with hand-rolled transforms. The standard
// fixes the engine's output sequence but not the distributions, so uniform /
// normal / shuffle are implemented here to keep every draw reproducible
// across compilers and standard libraries.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "shad/matrix.hpp"

namespace shad {

// Stable seed derivation: FNV-1a of the tag folded into the base seed.
// Lets independent pipeline stages (data, init, stream, ...) draw from
// disjoint streams of one user-facing seed.
inline uint64_t derive_seed(uint64_t base, std::string_view tag) {
    uint64_t h = 1469598103934665603ull ^ base;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return h;
}

class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    Rng fork(std::string_view tag) { return Rng(derive_seed(eng_(), tag)); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be >= 1.
    int uniform_int(int n) {
        int v = static_cast<int>(uniform() * n);
        return v < n ? v : n - 1;
    }

    // Standard normal via Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    Matrix normal_matrix(int rows, int cols, double stddev = 1.0) {
        Matrix m(rows, cols);
        for (int i = 0; i < m.size(); ++i) m.at_flat(i) = stddev * normal();
        return m;
    }

    Matrix uniform_matrix(int rows, int cols, double lo, double hi) {
        Matrix m(rows, cols);
        for (int i = 0; i < m.size(); ++i) m.at_flat(i) = uniform(lo, hi);
        return m;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(i + 1);
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
        }
    }

    // Sample a class index from a probability vector (1xC).
    int categorical(const Matrix& probs) {
        double u = uniform();
        double acc = 0.0;
        int last = probs.size() - 1;
        for (int c = 0; c < probs.size(); ++c) {
            acc += probs.at_flat(c);
            if (u < acc) return c;
        }
        return last;
    }

    uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace shad
