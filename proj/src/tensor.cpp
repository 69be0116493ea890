#include "videomind/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "videomind/error.hpp"

namespace videomind {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c)
        throw ShapeError("matrix data length does not match shape");
}

bool Matrix::all_finite() const noexcept {
    for (double v : data)
        if (!std::isfinite(v))
            return false;
    return true;
}

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a(std::span<const double> values, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (double v : values) {
        unsigned char buf[sizeof(double)];
        std::memcpy(buf, &v, sizeof(double));
        h = fnv1a(std::span<const unsigned char>(buf, sizeof(buf)), h);
    }
    return h;
}

// mt19937_64's output sequence is fixed by the standard; the transforms below
// are spelled out because std::*_distribution output is implementation defined.
Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
    if (n == 0)
        throw PreconditionError("Rng::index requires n > 0");
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

}  // namespace videomind
