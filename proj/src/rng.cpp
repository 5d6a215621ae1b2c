#include "survstack/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace survstack {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

RngStream::RngStream(std::uint64_t seed, const StreamId& id) {
    std::uint64_t state = seed;
    splitmix64(state);
    state ^= static_cast<std::uint64_t>(id.test_case) * 0x9e3779b97f4a7c15ULL;
    splitmix64(state);
    state ^= static_cast<std::uint64_t>(id.series) * 0xd1b54a32d192ed03ULL;
    splitmix64(state);
    state ^= fnv1a(id.purpose);
    std::uint32_t words[8];
    for (auto& w : words) w = static_cast<std::uint32_t>(splitmix64(state));
    std::seed_seq seq(std::begin(words), std::end(words));
    engine_.seed(seq);
}

RngStream derive_stream(std::uint64_t seed, const StreamId& id) {
    return RngStream(seed, id);
}

std::uint64_t RngStream::next_u64() {
    return engine_();
}

double RngStream::next_double() {
    // 53 significant bits.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(engine_()); // full 64-bit range
    // Rejection to remove modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % range);
}

double RngStream::normal(double mean, double stddev) {
    if (have_spare_) {
        have_spare_ = false;
        return mean + stddev * spare_;
    }
    // Marsaglia polar method.
    double u, v, s;
    do {
        u = 2.0 * next_double() - 1.0;
        v = 2.0 * next_double() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    have_spare_ = true;
    return mean + stddev * u * factor;
}

double RngStream::gamma(double shape, double scale) {
    if (shape <= 0.0 || scale <= 0.0) throw std::invalid_argument("gamma: non-positive parameter");
    if (shape < 1.0) {
        // Boost to shape+1 and correct with a power of a uniform.
        const double u = 1.0 - next_double(); // (0,1]
        return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    // Marsaglia-Tsang squeeze method.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal(0.0, 1.0);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = 1.0 - next_double();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
}

std::int64_t RngStream::poisson(double lambda) {
    if (lambda < 0.0 || !std::isfinite(lambda)) throw std::invalid_argument("poisson: bad lambda");
    std::int64_t total = 0;
    // Additivity keeps the multiplication method inside exp() range.
    while (lambda > 30.0) {
        double chunk = 30.0;
        const double threshold = std::exp(-chunk);
        double prod = next_double();
        std::int64_t k = 0;
        while (prod > threshold) {
            prod *= next_double();
            ++k;
        }
        total += k;
        lambda -= chunk;
    }
    if (lambda > 0.0) {
        const double threshold = std::exp(-lambda);
        double prod = next_double();
        std::int64_t k = 0;
        while (prod > threshold) {
            prod *= next_double();
            ++k;
        }
        total += k;
    }
    return total;
}

double RngStream::lognormal(double log_mean, double log_stddev) {
    return std::exp(normal(log_mean, log_stddev));
}

std::int64_t RngStream::negative_binomial(double mean, double dispersion) {
    if (mean <= 0.0) throw std::invalid_argument("negative_binomial: mean must be positive");
    if (dispersion < 1.0) throw std::invalid_argument("negative_binomial: dispersion must be >= 1");
    if (dispersion == 1.0) return poisson(mean);
    const double shape = mean / (dispersion - 1.0);
    const double lambda = gamma(shape, dispersion - 1.0);
    return poisson(lambda);
}

} // namespace survstack
