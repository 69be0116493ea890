#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <future>
#include <vector>

#include "support.hpp"
#include "videomind/decoder.hpp"
#include "videomind/error.hpp"
#include "videomind/training.hpp"

using namespace videomind;

namespace {

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(r, c);
    for (auto& v : m.data)
        v = rng.normal();
    return m;
}

}  // namespace

TEST_SUITE("decoder") {
    TEST_CASE("sinusoidal encoding matches the closed form") {
        const std::size_t d = 8;
        for (std::size_t t = 0; t < 16; ++t) {
            const auto pe = sinusoidal_pe(t, 16, d);
            for (std::size_t k = 0; k < d / 2; ++k) {
                const double angle = static_cast<double>(t) / std::pow(10000.0, 2.0 * k / d);
                CHECK(pe[2 * k] == doctest::Approx(std::sin(angle)).epsilon(1e-14));
                CHECK(pe[2 * k + 1] == doctest::Approx(std::cos(angle)).epsilon(1e-14));
            }
        }
        CHECK(sinusoidal_pe(0, 16, 8)[1] == 1.0);
        CHECK(sinusoidal_pe(3, 16, 8) != sinusoidal_pe(5, 16, 8));
        CHECK_THROWS_AS(sinusoidal_pe(16, 16, 8), RangeError);
    }

    TEST_CASE("average pooling over the spatial grid") {
        FeatureSequence f;
        f.t = 2;
        f.h = 2;
        f.w = 1;
        f.d = 2;
        f.values = {1, 2, 3, 4, 10, 20, 30, 40};
        f.frame_times = {0.5, 1.5};
        const Matrix p = avg_pool_frames(f);
        CHECK(p.rows == 2);
        CHECK(p(0, 0) == 2.0);
        CHECK(p(0, 1) == 3.0);
        CHECK(p(1, 0) == 20.0);
        CHECK(p(1, 1) == 30.0);
    }

    TEST_CASE("pyramid length is T + T/2 + T/4 + T/8") {
        DecoderConfig cfg = tiny_decoder_config();
        const DecoderWeights w = init_decoder_weights(cfg, 1);
        for (std::size_t t : {8u, 16u, 32u, 64u}) {
            const Pyramid p = build_pyramid(random_matrix(t, cfg.d_model, t), w, cfg);
            CHECK(p.length() == t + t / 2 + t / 4 + t / 8);
            CHECK(cfg.pyramid_length(t) == p.length());
            CHECK(p.level_lengths == std::vector<std::size_t>{t, t / 2, t / 4, t / 8});
            CHECK(p.anchors.back().level == 3);
            CHECK(p.anchors.back().index == t / 8 - 1);
        }
        CHECK_THROWS_AS(cfg.check_frames(12), ShapeError);
    }

    TEST_CASE("decode_position examples") {
        const auto [s0, e0] = decode_position({0, 4}, 1.0, 2.0);
        CHECK(s0 == 3.5);
        CHECK(e0 == 6.5);
        // 8 frames over 80 s: 10 s per frame.
        CHECK(s0 * 10.0 == 35.0);
        CHECK(e0 * 10.0 == 65.0);
        const auto [s1, e1] = decode_position({1, 0}, 0.5, 0.5);
        CHECK(s1 == 0.0);
        CHECK(e1 == 2.0);
    }

    TEST_CASE("decode_candidates converts, clamps, suppresses and ranks") {
        ForwardTrace tr;
        tr.pooled = Matrix(8, 1);
        tr.pyramid.anchors = {{0, 4}, {1, 0}, {0, 0}, {0, 3}};
        tr.heads.cls_scores = {0.9, 0.6, 0.3, 0.8};
        tr.heads.offsets = Matrix(4, 2, std::vector<double>{1.0, 2.0, 0.5, 0.5, 3.0, 1.0, 1.0, 2.0});
        const auto c = decode_candidates(tr, 80.0, 5);
        // {0,0} decodes to frames [-2.5,1.5] and clamps to [0,15] s, which sits
        // at IoU exactly 0.75 with [0,20] and so survives.
        REQUIRE(c.size() == 4);
        CHECK(c[0] == Moment{35.0, 65.0, 0.9});
        CHECK(c[1] == Moment{25.0, 55.0, 0.8});
        CHECK(c[2] == Moment{0.0, 20.0, 0.6});
        CHECK(c[3] == Moment{0.0, 15.0, 0.3});
        CHECK(decode_candidates(tr, 80.0, 2).size() == 2);
    }

    TEST_CASE("symmetric offsets at the centre give a symmetric moment") {
        ForwardTrace tr;
        tr.pooled = Matrix(8, 1);
        tr.pyramid.anchors = {{3, 0}};
        tr.heads.cls_scores = {0.5};
        tr.heads.offsets = Matrix(1, 2, std::vector<double>{0.25, 0.25});
        const auto c = decode_candidates(tr, 16.0, 1);
        CHECK(c[0].start + c[0].end == doctest::Approx(16.0));
    }

    TEST_CASE("forward pass shapes, ranges and determinism") {
        const DecoderConfig cfg = tiny_decoder_config();
        const DecoderWeights w = init_decoder_weights(cfg, 42);
        const TrainingExample ex = tiny_fixture(42);
        const ForwardTrace a = decoder_forward(ex.features, ex.reg, w, cfg);
        const ForwardTrace b = decoder_forward(ex.features, ex.reg, w, cfg);
        CHECK(a.checksum() == b.checksum());
        CHECK(a.pooled.rows == 8);
        CHECK(a.fused_v.cols == cfg.d_model);
        CHECK(a.fused_r.rows == 1);
        CHECK(a.heads.cls_scores.size() == 15);
        for (double c : a.heads.cls_scores) {
            CHECK(c > 0.0);
            CHECK(c < 1.0);
        }
        for (double o : a.heads.offsets.data)
            CHECK(o > 0.0);
        for (double s : a.heads.frame_sims) {
            CHECK(s >= -1.0 - 1e-12);
            CHECK(s <= 1.0 + 1e-12);
        }
        // The untrained head sits near the 1% prior.
        double mean = 0.0;
        for (double c : a.heads.cls_scores)
            mean += c / 15.0;
        CHECK(mean < 0.1);
    }

    TEST_CASE("concurrent forward passes agree") {
        const DecoderConfig cfg = tiny_decoder_config();
        const DecoderWeights w = init_decoder_weights(cfg, 42);
        const TrainingExample ex = tiny_fixture(42);
        const auto expected = decoder_forward(ex.features, ex.reg, w, cfg).checksum();
        std::vector<std::future<std::uint64_t>> runs;
        for (int i = 0; i < 4; ++i)
            runs.push_back(std::async(std::launch::async,
                                      [&] { return decoder_forward(ex.features, ex.reg, w, cfg).checksum(); }));
        for (auto& r : runs)
            CHECK(r.get() == expected);
    }

    TEST_CASE("stage functions compose into the full forward pass") {
        const DecoderConfig cfg = tiny_decoder_config();
        const DecoderWeights w = init_decoder_weights(cfg, 9);
        const TrainingExample ex = tiny_fixture(9);
        const ForwardTrace full = decoder_forward(ex.features, ex.reg, w, cfg);
        const ForwardTrace fused = fuse(ex.features, ex.reg, w, cfg);
        CHECK(fused.fused_v == full.fused_v);
        const Pyramid p = build_pyramid(fused.fused_v, w, cfg);
        CHECK(p.features == full.pyramid.features);
        const HeadOutputs h = predict_heads(p, fused.fused_r, w, cfg);
        CHECK(h.cls_scores == full.heads.cls_scores);
        CHECK(h.offsets == full.heads.offsets);
    }

    TEST_CASE("level scales multiply offsets and leave scores alone") {
        const DecoderConfig cfg = tiny_decoder_config();
        DecoderWeights w = init_decoder_weights(cfg, 4);
        const TrainingExample ex = tiny_fixture(4);
        const ForwardTrace base = decoder_forward(ex.features, ex.reg, w, cfg);
        w.level_scales(0, 2) *= 3.0;
        const ForwardTrace scaled = decoder_forward(ex.features, ex.reg, w, cfg);
        CHECK(scaled.heads.cls_scores == base.heads.cls_scores);
        CHECK(scaled.heads.frame_sims == base.heads.frame_sims);
        for (std::size_t i = 0; i < base.pyramid.anchors.size(); ++i) {
            const double f = base.pyramid.anchors[i].level == 2 ? 3.0 : 1.0;
            CHECK(scaled.heads.offsets(i, 0) == doctest::Approx(f * base.heads.offsets(i, 0)));
            CHECK(scaled.heads.offsets(i, 1) == doctest::Approx(f * base.heads.offsets(i, 1)));
        }
    }

    TEST_CASE("zero weights give a finite, deterministic output") {
        const DecoderConfig cfg = tiny_decoder_config();
        const DecoderWeights w = zero_decoder_weights(cfg);
        const TrainingExample ex = tiny_fixture(1);
        const ForwardTrace a = decoder_forward(ex.features, ex.reg, w, cfg);
        CHECK(a.pyramid.features.all_finite());
        CHECK(a.heads.offsets.all_finite());
        for (double c : a.heads.cls_scores)
            CHECK(c == 0.5);
        CHECK(a.checksum() == decoder_forward(ex.features, ex.reg, w, cfg).checksum());
    }

    TEST_CASE("weight validation") {
        const DecoderConfig cfg = tiny_decoder_config();
        DecoderWeights w = init_decoder_weights(cfg, 2);
        std::size_t counted = 0;
        w.visit([&](const std::string&, const Matrix& m) { counted += m.size(); });
        CHECK(parameter_count(w) == counted);
        CHECK_NOTHROW(validate_weights(w, cfg));
        w.mod_v(0, 0) = std::nan("");
        CHECK_THROWS_AS(validate_weights(w, cfg), NumericError);
        DecoderWeights other = init_decoder_weights(cfg, 2);
        other.proj_v.weight = Matrix(3, 3);
        CHECK_THROWS_AS(validate_weights(other, cfg), ShapeError);
        FeatureSequence f = tiny_fixture(2).features;
        f.d = 7;
        f.values.resize(f.t * f.h * f.w * 7);
        CHECK_THROWS(decoder_forward(f, RegToken{std::vector<double>(7)}, init_decoder_weights(cfg, 2), cfg));
    }

    TEST_CASE("golden forward trace, seed 42, T=8") {
        const DecoderConfig cfg = tiny_decoder_config();
        const DecoderWeights w = init_decoder_weights(cfg, 42);
        const TrainingExample ex = tiny_fixture(42);
        const ForwardTrace tr = decoder_forward(ex.features, ex.reg, w, cfg);
        testsupport::check_golden("decoder_trace_seed42_t8.txt", hex(tr.checksum()) + "\n");
    }
}
