#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "osassl/core.hpp"

namespace testing_support {

using namespace osassl;

inline CovariateSchema simple_schema(std::size_t x = 2, std::size_t z = 2) {
    std::vector<CovariateEntry> e;
    for (std::size_t i = 0; i < x; ++i)
        e.push_back({"x" + std::to_string(i + 1), CovariateKind::continuous, 0, "x", CovariateRole::x});
    for (std::size_t i = 0; i < z; ++i)
        e.push_back({"z" + std::to_string(i + 1), CovariateKind::continuous, 0, "swi", CovariateRole::swi});
    return CovariateSchema(std::move(e));
}

/// Random panel over `cities` cities and `slices` consecutive years from 1.
inline Panel random_panel(std::size_t cities, std::size_t slices, std::uint64_t seed, std::size_t x = 2,
                          std::size_t z = 2, double p_declared = 0.6) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<PanelSlice> out;
    for (std::size_t t = 0; t < slices; ++t) {
        std::vector<Observation> obs;
        for (std::size_t a = 0; a < cities; ++a) {
            std::vector<double> xs, zs;
            for (std::size_t i = 0; i < x; ++i)
                xs.push_back(u(rng));
            for (std::size_t i = 0; i < z; ++i)
                zs.push_back(u(rng));
            const bool d = u(rng) < p_declared;
            const double y = d ? 1.0 + 3.0 * xs[0] + u(rng) : 0.0;
            obs.emplace_back(CityId{static_cast<std::int64_t>(a + 1)}, TimeIndex{static_cast<std::int64_t>(t + 1)},
                             xs, zs, y, d);
        }
        out.emplace_back(TimeIndex{static_cast<std::int64_t>(t + 1)}, std::move(obs));
    }
    return Panel::from_slices(simple_schema(x, z), std::move(out));
}

inline bool rel_close(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testing_support

namespace testing_support {

inline bool same_panel(const osassl::Panel& a, const osassl::Panel& b) {
    if (a.num_slices() != b.num_slices() || a.num_cities() != b.num_cities() || a.cost_bound() != b.cost_bound())
        return false;
    for (std::size_t s = 0; s < a.num_slices(); ++s)
        for (std::size_t i = 0; i < a.num_cities(); ++i) {
            const auto& x = a.slice(s)[i];
            const auto& y = b.slice(s)[i];
            if (x.city() != y.city() || x.time() != y.time() || x.x() != y.x() || x.z() != y.z() ||
                x.y() != y.y() || x.declared() != y.declared())
                return false;
        }
    return true;
}

}  // namespace testing_support
