#pragma once

#include <complex>
#include <random>

#include "shint/tensor.hpp"

namespace support {

inline shint::SpatialTensor random_spatial(std::mt19937_64& gen, std::size_t c, std::size_t h, std::size_t w) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    shint::SpatialTensor t(c, h, w);
    for (auto& v : t.data())
        v = u(gen);
    return t;
}

inline shint::SpectralTensor random_spectral(std::mt19937_64& gen, std::size_t c, std::size_t h, std::size_t w) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    shint::SpectralTensor t(c, h, w);
    for (auto& v : t.data()) {
        const double re = u(gen);
        v = {re, u(gen)};
    }
    return t;
}

} // namespace support
