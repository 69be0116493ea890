#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include <json.hpp>

#include "support.hpp"

using testsupport::read_text;
using testsupport::TempDir;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(const std::string& args, const TempDir& dir) {
    const auto out = dir.path() / "stdout.txt";
    const auto err = dir.path() / "stderr.txt";
    const std::string cmd = std::string("\"") + VIDEOMIND_CLI + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text(out), read_text(err)};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("synth is byte-deterministic") {
        TempDir dir("cli-synth");
        const auto a = dir.path() / "a", b = dir.path() / "b";
        CHECK(cli("synth --t 16 --seed 3 --out " + a.string(), dir).code == 0);
        CHECK(cli("synth --t 16 --seed 3 --out " + b.string(), dir).code == 0);
        CHECK(read_text(a / "annotations.jsonl") == read_text(b / "annotations.jsonl"));
        CHECK(read_text(a / "features/synth-3-1.bin") == read_text(b / "features/synth-3-1.bin"));
        CHECK(lines(read_text(a / "annotations.jsonl")) == 3);
    }

    TEST_CASE("mock pipeline end to end, then eval") {
        TempDir dir("cli-pipe");
        const auto d = dir.path() / "d";
        REQUIRE(cli("synth --t 16 --seed 5 --out " + d.string(), dir).code == 0);
        const Run p = cli("pipeline --annotations " + (d / "annotations.jsonl").string() + " --backend mock --out " +
                              (dir.path() / "p.jsonl").string(),
                          dir);
        CHECK(p.code == 0);
        CHECK(lines(read_text(dir.path() / "p.jsonl")) == 3);
        const Run e = cli("eval --pred " + (dir.path() / "p.jsonl").string() + " --gt " +
                              (d / "annotations.jsonl").string() + " --metrics riou,miou,miop,gqa,map --thresholds 0.3,0.5,0.7",
                          dir);
        CHECK(e.code == 0);
        const auto report = nlohmann::json::parse(e.out);
        CHECK(report["count"] == 3);
        CHECK(report.contains("R@0.7"));
        CHECK(report.contains("mAP"));
    }

    TEST_CASE("frozen mock predictions reproduce and evaluate to the frozen report") {
        TempDir dir("cli-golden");
        const auto ann = testsupport::golden_path("eval_annotations.jsonl");
        const auto pred = testsupport::golden_path("eval_predictions.jsonl");
        const Run p = cli("pipeline --annotations " + ann.string() + " --backend mock --seed 0 --out " +
                              (dir.path() / "p.jsonl").string(),
                          dir);
        REQUIRE(p.code == 0);
        testsupport::check_golden("eval_predictions.jsonl", read_text(dir.path() / "p.jsonl"));
        const Run e = cli("eval --pred " + pred.string() + " --gt " + ann.string() +
                              " --metrics riou,riop,miou,miop,acc,gqa,map,cg --thresholds 0.3,0.5,0.7",
                          dir);
        REQUIRE(e.code == 0);
        testsupport::check_golden("eval_metrics.json", e.out);
    }

    TEST_CASE("train-toy, ground and gradcheck") {
        TempDir dir("cli-train");
        const auto w = dir.path() / "w.json";
        const Run t = cli("train-toy --steps 3 --lr 0.01 --seed 42 --out " + w.string(), dir);
        REQUIRE(t.code == 0);
        const auto summary = nlohmann::json::parse(t.out);
        CHECK(summary["final_loss"].get<double>() < summary["initial_loss"].get<double>());
        REQUIRE(cli("synth --t 16 --seed 1 --count 1 --out " + (dir.path() / "d").string(), dir).code == 0);
        const Run g = cli("ground --weights " + w.string() + " --features " +
                              (dir.path() / "d/features/synth-1-0.json").string() + " --query x --topk 5 --duration 32",
                          dir);
        CHECK(g.code == 0);
        const auto moments = nlohmann::json::parse(g.out);
        CHECK(moments.size() <= 5);
        CHECK(moments[0].size() == 3);
        const Run c = cli("gradcheck --seed 42", dir);
        CHECK(c.code == 0);
        CHECK(nlohmann::json::parse(c.out)["pass"] == true);
        CHECK(cli("gradcheck --seed 42 --tolerance 1e-300", dir).code == 1);
    }

    TEST_CASE("errors: usage is 2, domain is 1, one diagnostic line") {
        TempDir dir("cli-err");
        const Run unknown = cli("synth --out x --frobnicate", dir);
        CHECK(unknown.code == 2);
        CHECK(lines(unknown.err) == 1);
        CHECK(cli("", dir).code == 2);
        CHECK(cli("eval --pred /nonexistent --gt /nonexistent", dir).code == 2);
        std::ofstream(dir.path() / "cfg.json") << R"({"pipeline":{"top_kk":1}})";
        std::ofstream(dir.path() / "a.jsonl") << "{\"video_id\":\"v\",\"duration\":10.0,\"query\":\"q\",\"gt_moments\":[[1.0,12.0]]}\n";
        const Run bad_cfg = cli("pipeline --annotations " + (dir.path() / "a.jsonl").string() + " --config " +
                                    (dir.path() / "cfg.json").string() + " --out " + (dir.path() / "p.jsonl").string(),
                                dir);
        CHECK(bad_cfg.code == 1);
        CHECK(lines(bad_cfg.err) == 1);
        const Run bad_ann = cli("pipeline --annotations " + (dir.path() / "a.jsonl").string() + " --out " +
                                    (dir.path() / "p.jsonl").string(),
                                dir);
        CHECK(bad_ann.code == 1);
        CHECK(bad_ann.err.find(":1:") != std::string::npos);
    }
}
