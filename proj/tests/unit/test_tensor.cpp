#include <doctest.h>

#include <cmath>
#include <set>

#include "videomind/tensor.hpp"

using namespace videomind;

TEST_SUITE("tensor") {
    TEST_CASE("Rng is reproducible and seed sensitive") {
        Rng a(5), b(5), c(6);
        for (int i = 0; i < 100; ++i) {
            const double x = a.uniform();
            CHECK(x == b.uniform());
            CHECK(x >= 0.0);
            CHECK(x < 1.0);
        }
        CHECK(Rng(5).normal() != c.normal());
    }

    TEST_CASE("Rng moments are plausible") {
        Rng r(11);
        const int n = 20000;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double z = r.normal();
            sum += z;
            sq += z * z;
        }
        CHECK(std::abs(sum / n) < 0.05);
        CHECK(std::abs(sq / n - 1.0) < 0.05);
        std::set<std::size_t> seen;
        for (int i = 0; i < 200; ++i)
            seen.insert(r.index(7));
        CHECK(seen.size() == 7);
        CHECK(*seen.rbegin() == 6);
    }

    TEST_CASE("fnv1a is the published 64-bit hash") {
        // Reference values of FNV-1a 64 for "" and "a".
        CHECK(fnv1a(std::span<const unsigned char>{}) == 0xcbf29ce484222325ULL);
        const unsigned char a[] = {'a'};
        CHECK(fnv1a(std::span<const unsigned char>(a, 1)) == 0xaf63dc4c8601ec8cULL);
    }

    TEST_CASE("Matrix basics") {
        Matrix m(2, 3, 1.5);
        m(1, 2) = -2.0;
        CHECK(m.row(1)[2] == -2.0);
        CHECK(m.all_finite());
        m(0, 0) = std::nan("");
        CHECK_FALSE(m.all_finite());
        CHECK_THROWS(Matrix(2, 2, std::vector<double>{1.0}));
    }
}
