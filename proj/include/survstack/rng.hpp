// rng.hpp -- seeded, stream-addressable random number generation.
//
// Every random draw in the project flows through an RngStream derived from
// (seed, stream id). Streams with distinct ids are independent, and a given
// (seed, id) pair always reproduces the same sequence, so adding consumers
// of randomness elsewhere never perturbs existing output. Samplers are
// implemented here rather than taken from <random> because the standard
// distribution classes are implementation-defined.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace survstack {

struct StreamId {
    std::int64_t test_case = 0;
    std::int64_t series = 0;
    std::string purpose;
};

class RngStream {
public:
    RngStream(std::uint64_t seed, const StreamId& id);

    std::uint64_t next_u64();

    // Uniform on [0,1).
    double next_double();

    // Uniform integer on [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    double normal(double mean, double stddev);

    // Shape/scale parameterization, shape > 0, scale > 0.
    double gamma(double shape, double scale);

    std::int64_t poisson(double lambda);

    // exp(N(log_mean, log_stddev))
    double lognormal(double log_mean, double log_stddev);

    // Count with the given mean and variance dispersion*mean (dispersion >= 1).
    // dispersion == 1 is Poisson; otherwise a gamma-Poisson mixture.
    std::int64_t negative_binomial(double mean, double dispersion);

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Pure function of its arguments: the canonical way to obtain a stream.
RngStream derive_stream(std::uint64_t seed, const StreamId& id);

} // namespace survstack
