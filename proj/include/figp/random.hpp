#ifndef FIGP_RANDOM_HPP
#define FIGP_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

#include <Eigen/Dense>

namespace figp {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to mix seeds into independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the RNG stream owned by one task, derived from the master seed and
/// an ordered list of task coordinates, e.g. (subset, model, input).
inline std::uint64_t stream_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) noexcept
{
    std::uint64_t s = mix_seed(master);
    for (auto c : coords)
        s = mix_seed(s ^ mix_seed(c + 0x632be59bd9b4e019ULL));
    return s;
}

inline double uniform01(Rng& rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double std_normal(Rng& rng)
{
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double half_normal(Rng& rng, double scale = 1.0) { return scale * std::abs(std_normal(rng)); }

inline double half_cauchy(Rng& rng, double scale = 1.0)
{
    double u = uniform01(rng);
    return scale * std::abs(std::tan(std::numbers::pi * (u - 0.5)));
}

/// Beta(a, 1) by inversion: F(x) = x^a.
inline double beta_a1(Rng& rng, double a)
{
    double u = uniform01(rng);
    while (u <= 0.0)
        u = uniform01(rng);
    return std::pow(u, 1.0 / a);
}

inline double beta(Rng& rng, double a, double b)
{
    double x = std::gamma_distribution<double>(a, 1.0)(rng);
    double y = std::gamma_distribution<double>(b, 1.0)(rng);
    return x / (x + y);
}

inline Eigen::VectorXd std_normal_vector(Rng& rng, Eigen::Index n)
{
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i)
        z(i) = std_normal(rng);
    return z;
}

} // namespace figp

#endif
