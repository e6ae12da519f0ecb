#pragma once

#include <random>

#include "mfgcip/forward.hpp"

namespace mfgcip::testing {

/// Letter-A data set on the default inversion grid from a cheap forward solve.
inline const SyntheticDataset& small_dataset() {
    static const SyntheticDataset ds = [] {
        ForwardConfig cfg;
        cfg.fine = SpaceTimeGrid::unit(40, 40);
        return generate_dataset(letter_phantom(LetterShape::A, DomainSpec{}, 2.0), DeltaGaussianKernel{0.2},
                                SpaceTimeGrid::unit(20, 10), cfg);
    }();
    return ds;
}

inline ScalarField random_field(const SpaceTimeGrid& g, unsigned seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-scale, scale);
    ScalarField f(g);
    for (double& x : f.values()) x = U(rng);
    return f;
}

inline std::vector<double> random_vector(std::size_t n, unsigned seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-scale, scale);
    std::vector<double> x(n);
    for (double& v : x) v = U(rng);
    return x;
}

} // namespace mfgcip::testing
