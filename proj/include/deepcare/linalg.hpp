#pragma once

// Dense vector/matrix substrate, elementwise nonlinearities and a seedable
// deterministic RNG. Everything above this layer is expressed in these
// primitives. 64-bit floats throughout.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepcare {

using Vec = std::vector<double>;

struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Row-major dense matrix.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    bool empty() const { return a.empty(); }
    std::size_t size() const { return a.size(); }
};

inline Vec matvec(const Mat& m, const Vec& v) {
    if (m.cols != v.size()) {
        throw shape_error("matvec: matrix is " + std::to_string(m.rows) + "x" +
                          std::to_string(m.cols) + " but vector has length " +
                          std::to_string(v.size()));
    }
    Vec out(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double s = 0.0;
        const double* row = m.a.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * v[j];
        out[i] = s;
    }
    return out;
}

// out += M^T v; used by reverse accumulation.
inline void matvec_t_add(const Mat& m, const Vec& v, Vec& out) {
    if (m.rows != v.size() || m.cols != out.size()) {
        throw shape_error("matvec_t_add: incompatible shapes");
    }
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        const double* mrow = m.a.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) out[j] += mrow[j] * vi;
    }
}

// M += u v^T
inline void add_outer(Mat& m, const Vec& u, const Vec& v) {
    if (m.rows != u.size() || m.cols != v.size()) {
        throw shape_error("add_outer: incompatible shapes");
    }
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = m.a.data() + i * m.cols;
        const double ui = u[i];
        if (ui == 0.0) continue;
        for (std::size_t j = 0; j < m.cols; ++j) row[j] += ui * v[j];
    }
}

inline void add_in_place(Vec& x, const Vec& y) {
    if (x.size() != y.size()) throw shape_error("add_in_place: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

// Largest double below 1; saturated activations are clamped here so the
// open-interval gate contracts hold for every finite input.
inline constexpr double kOneBelow = 0x1.fffffffffffffp-1;

// Numerically symmetric branch form: never evaluates exp of a large positive
// argument. Output strictly inside (0,1).
inline double sigmoid(double x) {
    double s;
    if (x >= 0.0) {
        const double z = std::exp(-x);
        s = 1.0 / (1.0 + z);
    } else {
        const double z = std::exp(x);
        s = z / (1.0 + z);
    }
    if (s >= 1.0) return kOneBelow;
    if (s <= 0.0) return std::numeric_limits<double>::min();
    return s;
}

inline Vec sigmoid(const Vec& v) {
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
    return out;
}

// Strictly inside (-1,1).
inline double tanh_open(double x) {
    const double t = std::tanh(x);
    if (t >= 1.0) return kOneBelow;
    if (t <= -1.0) return -kOneBelow;
    return t;
}

inline Vec tanh_vec(const Vec& v) {
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = tanh_open(v[i]);
    return out;
}

// Max-subtracted softmax; stable for arbitrarily large inputs.
inline Vec softmax(const Vec& v) {
    if (v.empty()) return {};
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    Vec out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

inline bool all_finite(const Vec& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

// Deterministic 64-bit generator, identical stream on every platform.
// State update (xorshift64*):
//   s ^= s >> 12;  s ^= s << 25;  s ^= s >> 27;  output = s * 2685821657736338717
// Seeding passes the seed through one splitmix64 round so that small seeds
// still give well-mixed states. No libstdc++ distributions are used anywhere;
// uniform/normal/geometric draws below are part of the documented stream.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) { set_state(splitmix64(seed)); }

    std::uint64_t next_u64() {
        s_ ^= s_ >> 12;
        s_ ^= s_ << 25;
        s_ ^= s_ >> 27;
        return s_ * 0x2545F4914F6CDD1DULL;
    }

    // [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw config_error("Rng::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Box-Muller, one value per call (the sine twin is discarded so the
    // state stays a single u64 snapshot).
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double lognormal(double mu, double sigma) { return std::exp(mu + sigma * normal()); }

    // Number of failures before the first success; mean (1-p)/p.
    std::uint64_t geometric(double p) {
        if (p <= 0.0 || p > 1.0) throw config_error("Rng::geometric: p must be in (0,1]");
        std::uint64_t k = 0;
        while (!bernoulli(p)) ++k;
        return k;
    }

    template <class T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(xs[i - 1], xs[j]);
        }
    }

    std::uint64_t state() const { return s_; }
    void set_state(std::uint64_t s) { s_ = s ? s : 0x9E3779B97F4A7C15ULL; }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    // Stable derivation of independent substreams, e.g. per (epoch, sequence).
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
        return splitmix64(splitmix64(splitmix64(a) ^ b) ^ c);
    }

  private:
    std::uint64_t s_ = 0x9E3779B97F4A7C15ULL;
};

inline void fill_uniform(Mat& m, Rng& rng, double scale) {
    for (double& x : m.a) x = rng.uniform(-scale, scale);
}

inline void fill_uniform(Vec& v, Rng& rng, double scale) {
    for (double& x : v) x = rng.uniform(-scale, scale);
}

}  // namespace deepcare
