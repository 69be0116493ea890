// videomind: synthetic data, toy training, grounding, batch pipeline runs,
// evaluation and gradient checks. Exit codes: 0 ok, 1 domain error, 2 usage.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "videomind/backend.hpp"
#include "videomind/config.hpp"
#include "videomind/decoder.hpp"
#include "videomind/error.hpp"
#include "videomind/eval.hpp"
#include "videomind/http_backend.hpp"
#include "videomind/io.hpp"
#include "videomind/pipeline.hpp"
#include "videomind/synthetic.hpp"
#include "videomind/training.hpp"
#include "videomind/weights_io.hpp"

namespace fs = std::filesystem;
using namespace videomind;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, sep);)
        if (!item.empty())
            out.push_back(item);
    return out;
}

std::vector<double> parse_thresholds(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split(s, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size())
            throw UsageError("bad threshold '" + item + "'");
        out.push_back(v);
    }
    if (out.empty())
        throw UsageError("no thresholds given");
    return out;
}

ToolkitConfig config_or_default(const std::string& path) {
    return path.empty() ? ToolkitConfig{} : load_config(path);
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    const fs::path p(path);
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::trunc);
    if (!out)
        throw InputError("cannot write " + path);
    out << text;
}

fs::path features_manifest(const fs::path& dir, const std::string& video_id) { return dir / (video_id + ".json"); }

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
    std::size_t t = 16;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t count = 3;
    std::size_t dim = 8;
};

int run_synth(const SynthArgs& a) {
    SyntheticSpec spec;
    spec.frames = a.t;
    spec.dim = a.dim;
    Rng rng(a.seed);
    const fs::path out(a.out);
    std::vector<AnnotationRecord> records;
    for (std::size_t i = 0; i < a.count; ++i) {
        const std::string id = "synth-" + std::to_string(a.seed) + "-" + std::to_string(i);
        SyntheticClip clip = make_synthetic_clip(rng, spec, id);
        save_features(features_manifest(out / "features", id), clip.features, clip.reg);
        records.push_back(std::move(clip.annotation));
    }
    save_annotations(out / "annotations.jsonl", records);
    std::cout << "wrote " << records.size() << " clips to " << out.string() << "\n";
    return 0;
}

// ---- train-toy -------------------------------------------------------------

struct TrainArgs {
    std::size_t steps = 200;
    double lr = 1e-2;
    std::uint64_t seed = 42;
    std::string out;
    std::string config;
};

int run_train(const TrainArgs& a) {
    const ToolkitConfig cfg = config_or_default(a.config);
    ToyTrainingConfig toy;
    toy.loss = cfg.loss;
    toy.max_offset_units = cfg.max_offset_units;
    // d_input 0 means no explicit architecture; keep the toy one.
    if (cfg.decoder.d_input != 0)
        toy.decoder = cfg.decoder;
    const ToyTrainingResult r = train_toy(a.seed, a.steps, a.lr, toy);
    save_weights(a.out, r.weights, r.config);
    nlohmann::json j = {{"initial_loss", r.loss_history.front()},
                        {"final_loss", r.loss_history.back()},
                        {"steps", a.steps},
                        {"weights", a.out}};
    std::cout << j.dump() << "\n";
    return 0;
}

// ---- ground ----------------------------------------------------------------

struct GroundArgs {
    std::string weights;
    std::string features;
    std::string query;
    std::size_t topk = 5;
    double duration = 0.0;
    std::string config;
};

int run_ground(const GroundArgs& a) {
    const ToolkitConfig cfg = config_or_default(a.config);
    const auto [w, dcfg] = load_weights(a.weights);
    const auto [f, r] = load_features(a.features);
    // The REG token stored with the features already encodes the query.
    const ForwardTrace trace = decoder_forward(f, r, w, dcfg);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& m : decode_candidates(trace, a.duration, a.topk, cfg.pipeline.nms_threshold))
        out.push_back(moment_to_json(m));
    std::cout << out.dump() << "\n";
    return 0;
}

// ---- pipeline --------------------------------------------------------------

struct PipelineArgs {
    std::string annotations;
    std::string backend = "mock";
    std::string config;
    std::string out;
    std::string weights;
    std::string features_dir;
    std::optional<std::uint64_t> seed;
};

PredictionRecord to_prediction(const std::string& video_id, const PipelineResult& r) {
    PredictionRecord p;
    p.video_id = video_id;
    p.moments = r.ranked_moments();
    p.answer = r.answer;
    p.plan = r.plan;
    p.degraded = r.degraded;
    return p;
}

int run_pipeline_cmd(const PipelineArgs& a) {
    ToolkitConfig cfg = config_or_default(a.config);
    if (!a.weights.empty())
        cfg.weights = a.weights;
    if (!a.features_dir.empty())
        cfg.features_dir = a.features_dir;
    const std::uint64_t seed = a.seed.value_or(cfg.seed);
    const auto records = load_annotations(a.annotations);

    std::unique_ptr<RoleBackend> backend;
    if (a.backend == "mock") {
        std::optional<DecoderGrounder> grounder;
        if (cfg.weights) {
            if (!cfg.features_dir)
                throw InputError("decoder grounding needs a features directory");
            auto [w, dcfg] = load_weights(*cfg.weights);
            const fs::path dir = *cfg.features_dir;
            grounder = DecoderGrounder{std::move(w), dcfg,
                                       [dir](const std::string& id) { return load_features(features_manifest(dir, id)); },
                                       cfg.pipeline.top_k, cfg.pipeline.nms_threshold};
        }
        backend = std::make_unique<MockBackend>(seed, std::move(grounder));
    } else if (a.backend == "http") {
        if (cfg.backend.urls.size() != 4)
            throw InputError("the http backend needs backend.urls for all four roles in the config");
        backend = std::make_unique<HttpBackend>(cfg.backend);
    } else {
        throw UsageError("--backend must be mock or http");
    }

    auto run_one = [&](const AnnotationRecord& rec) {
        PipelineInput in;
        in.video.video_id = rec.video_id;
        in.video.duration = rec.duration;
        if (cfg.features_dir) {
            const fs::path m = features_manifest(*cfg.features_dir, rec.video_id);
            if (fs::exists(m))
                in.video.frame_timestamps = load_features(m).first.frame_times;
        }
        in.question = rec.question.value_or(rec.query);
        in.options = rec.options;
        in.subtitles = rec.subtitles;
        try {
            return to_prediction(rec.video_id, run_pipeline(in, *backend, cfg.pipeline));
        } catch (const PipelineError& e) {
            throw Error(rec.video_id + ": " + e.what());
        }
    };

    // Samples run concurrently in windows; output order is input order.
    std::vector<PredictionRecord> preds;
    for (std::size_t begin = 0; begin < records.size(); begin += cfg.batch_concurrency) {
        std::vector<std::future<PredictionRecord>> window;
        for (std::size_t i = begin; i < std::min(records.size(), begin + cfg.batch_concurrency); ++i)
            window.push_back(std::async(std::launch::async, run_one, std::cref(records[i])));
        for (auto& f : window)
            preds.push_back(f.get());
    }
    save_predictions(a.out, preds);
    std::cout << "wrote " << preds.size() << " predictions to " << a.out << "\n";
    return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string metrics = "riou,miou,miop,gqa,map";
    std::string thresholds;
    std::string config;
    std::string format = "json";
    std::string out;
};

int run_eval(const EvalArgs& a) {
    const ToolkitConfig cfg = config_or_default(a.config);
    MetricsRequest req;
    req.metrics = split(a.metrics, ',');
    req.thresholds = a.thresholds.empty() ? cfg.eval.iou_thresholds : parse_thresholds(a.thresholds);
    req.gqa_iop_threshold = cfg.eval.gqa_iop_threshold;
    req.cg_thresholds = cfg.eval.cg_thresholds;
    const auto records = make_eval_records(load_predictions(a.pred), load_annotations(a.gt));
    const auto report = metrics_report(records, req);
    write_text(a.out, a.format == "table" ? metrics_table(report) : report.dump(2) + "\n");
    return 0;
}

// ---- gradcheck -------------------------------------------------------------

struct GradArgs {
    std::uint64_t seed = 42;
    std::optional<double> tolerance;
    std::string config;
};

int run_gradcheck(const GradArgs& a) {
    const ToolkitConfig cfg = config_or_default(a.config);
    const double tol = a.tolerance.value_or(cfg.gradcheck.tolerance);
    const DecoderConfig dcfg = tiny_decoder_config();
    const TrainingExample ex = tiny_fixture(a.seed);
    const DecoderWeights w = init_decoder_weights(dcfg, a.seed);
    const TargetAssignment ta = assign_targets(ex.gt, ex.duration, ex.features.t, dcfg.pyramid_levels,
                                               cfg.max_offset_units);
    const GradientCheckReport r = gradient_check(w, dcfg, ex, ta, cfg.loss, cfg.gradcheck.eps);
    nlohmann::json j = {{"max_relative_error", r.max_relative_error},
                        {"worst_tensor", r.worst_tensor},
                        {"entries_checked", r.entries_checked},
                        {"tolerance", tol},
                        {"pass", r.max_relative_error <= tol}};
    std::cout << j.dump() << "\n";
    return r.max_relative_error <= tol ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"VideoMind toolkit: temporal grounding decoder, role pipeline and metrics"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate synthetic features and annotations");
    s->add_option("--t", synth.t, "Frames per clip")->check(CLI::PositiveNumber);
    s->add_option("--seed", synth.seed, "Random seed");
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--count", synth.count, "Number of clips")->check(CLI::PositiveNumber);
    s->add_option("--dim", synth.dim, "Feature dimension")->check(CLI::PositiveNumber);

    TrainArgs train;
    auto* t = app.add_subcommand("train-toy", "Fit the decoder on synthetic separable clips");
    t->add_option("--steps", train.steps, "Training steps");
    t->add_option("--lr", train.lr, "Learning rate")->check(CLI::PositiveNumber);
    t->add_option("--seed", train.seed, "Random seed");
    t->add_option("--out", train.out, "Weights manifest to write")->required();
    t->add_option("--config", train.config, "JSON config")->check(CLI::ExistingFile);

    GroundArgs ground;
    auto* g = app.add_subcommand("ground", "Decode candidate moments for one feature file");
    g->add_option("--weights", ground.weights, "Weights manifest")->required()->check(CLI::ExistingFile);
    g->add_option("--features", ground.features, "Features manifest")->required()->check(CLI::ExistingFile);
    g->add_option("--query", ground.query, "Query text (informational; the REG token carries it)");
    g->add_option("--topk", ground.topk, "Candidates to keep")->check(CLI::PositiveNumber);
    g->add_option("--duration", ground.duration, "Video duration in seconds")->required()->check(CLI::PositiveNumber);
    g->add_option("--config", ground.config, "JSON config")->check(CLI::ExistingFile);

    PipelineArgs pipe;
    auto* p = app.add_subcommand("pipeline", "Run planner, grounder, verifier and answerer over annotations");
    p->add_option("--annotations", pipe.annotations, "Annotations JSONL")->required()->check(CLI::ExistingFile);
    p->add_option("--backend", pipe.backend, "mock or http")->check(CLI::IsMember({"mock", "http"}));
    p->add_option("--config", pipe.config, "JSON config")->check(CLI::ExistingFile);
    p->add_option("--out", pipe.out, "Predictions JSONL")->required();
    p->add_option("--weights", pipe.weights, "Decoder weights for the mock grounder")->check(CLI::ExistingFile);
    p->add_option("--features-dir", pipe.features_dir, "Directory of <video_id>.json feature manifests");
    p->add_option("--seed", pipe.seed, "Mock backend seed");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Compute grounding and QA metrics");
    e->add_option("--pred", ev.pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
    e->add_option("--gt", ev.gt, "Annotations JSONL")->required()->check(CLI::ExistingFile);
    e->add_option("--metrics", ev.metrics, "Comma list of riou,riop,miou,miop,acc,gqa,map,cg");
    e->add_option("--thresholds", ev.thresholds, "Comma list of recall thresholds");
    e->add_option("--config", ev.config, "JSON config")->check(CLI::ExistingFile);
    e->add_option("--format", ev.format, "json or table")->check(CLI::IsMember({"json", "table"}));
    e->add_option("--out", ev.out, "Report path (default stdout)");

    GradArgs grad;
    auto* c = app.add_subcommand("gradcheck", "Compare gradients with finite differences on the tiny fixture");
    c->add_option("--seed", grad.seed, "Random seed");
    c->add_option("--tolerance", grad.tolerance, "Maximum relative error")->check(CLI::PositiveNumber);
    c->add_option("--config", grad.config, "JSON config")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        std::string msg = ex.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "usage error: " << msg << "\n";
        return 2;
    }

    try {
        if (s->parsed())
            return run_synth(synth);
        if (t->parsed())
            return run_train(train);
        if (g->parsed())
            return run_ground(ground);
        if (p->parsed())
            return run_pipeline_cmd(pipe);
        if (e->parsed())
            return run_eval(ev);
        if (c->parsed())
            return run_gradcheck(grad);
    } catch (const UsageError& ex) {
        std::cerr << "usage error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::string msg = ex.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << msg << "\n";
        return 1;
    }
    return 2;
}
