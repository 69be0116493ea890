#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace videomind {

/// Dense row-major matrix of doubles. Vectors are stored as 1 x n.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values);

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const noexcept { return data.size(); }
    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// 64-bit FNV-1a over the raw bytes of every value, for golden checksums.
std::uint64_t fnv1a(std::span<const double> values, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Portable pseudo-random source. Distribution transforms are written out
/// explicitly because the standard library's are implementation defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    double uniform();  // [0, 1)
    double uniform(double lo, double hi);
    double normal();
    std::size_t index(std::size_t n);  // uniform in [0, n)

private:
    std::mt19937_64 engine_;
};

}  // namespace videomind
