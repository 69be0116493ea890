#include "videomind/io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include "videomind/backend.hpp"
#include "videomind/error.hpp"

namespace videomind {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw InputError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw InputError("write failed: " + path.string());
}

void put_f64(std::string& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

template <class T>
T field(const json& j, const char* name) {
    if (!j.contains(name))
        throw ValidationError(std::string("missing field '") + name + "'");
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("field '") + name + "' has the wrong type");
    }
}

template <class T>
std::optional<T> optional_field(const json& j, const char* name) {
    if (!j.contains(name) || j.at(name).is_null())
        return std::nullopt;
    return field<T>(j, name);
}

void read_jsonl(const fs::path& path, const auto& on_line) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            on_line(json::parse(line));
        } catch (const json::parse_error& e) {
            throw ParseError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        } catch (const Error& e) {
            throw ValidationError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
}

}  // namespace

const Matrix& TensorBundle::at(std::string_view name) const {
    for (const auto& [n, m] : tensors)
        if (n == name)
            return m;
    throw ValidationError("missing tensor '" + std::string(name) + "'");
}

void write_tensor_bundle(const fs::path& manifest, const TensorBundle& bundle) {
    const fs::path blob = fs::path(manifest).replace_extension(".bin");
    json m = bundle.extra;
    m["blob"] = blob.filename().string();
    m["dtype"] = "f64le";
    m["tensors"] = json::array();
    std::string bytes;
    for (const auto& [name, t] : bundle.tensors) {
        if (t.data.size() != t.rows * t.cols)
            throw ShapeError("tensor '" + name + "' data does not match its shape");
        m["tensors"].push_back({{"name", name}, {"shape", {t.rows, t.cols}}, {"offset", bytes.size()}});
        for (double v : t.data)
            put_f64(bytes, v);
    }
    write_file(blob, bytes);
    write_file(manifest, m.dump(2) + "\n");
}

TensorBundle read_tensor_bundle(const fs::path& manifest) {
    json m;
    try {
        m = json::parse(read_file(manifest));
    } catch (const json::parse_error& e) {
        throw ParseError(manifest.string() + ": " + e.what());
    }
    if (field<std::string>(m, "dtype") != "f64le")
        throw ValidationError(manifest.string() + ": unsupported dtype");
    const std::string bytes = read_file(manifest.parent_path() / field<std::string>(m, "blob"));
    const auto* base = reinterpret_cast<const unsigned char*>(bytes.data());

    TensorBundle out;
    std::size_t expected_offset = 0;
    for (const auto& entry : field<json>(m, "tensors")) {
        const auto name = field<std::string>(entry, "name");
        const auto shape = field<std::vector<std::size_t>>(entry, "shape");
        const auto offset = field<std::size_t>(entry, "offset");
        if (shape.size() != 2)
            throw ShapeError("tensor '" + name + "' must be two-dimensional");
        const std::size_t count = shape[0] * shape[1];
        if (offset != expected_offset || offset + 8 * count > bytes.size())
            throw ShapeError("tensor '" + name + "' does not fit the blob");
        Matrix t(shape[0], shape[1]);
        for (std::size_t i = 0; i < count; ++i)
            t.data[i] = get_f64(base + offset + 8 * i);
        out.tensors.emplace_back(name, std::move(t));
        expected_offset = offset + 8 * count;
    }
    if (expected_offset != bytes.size())
        throw ShapeError(manifest.string() + ": blob has trailing bytes");
    m.erase("tensors");
    m.erase("blob");
    m.erase("dtype");
    out.extra = std::move(m);
    return out;
}

json annotation_to_json(const AnnotationRecord& r) {
    json j = {{"video_id", r.video_id}, {"duration", r.duration}, {"query", r.query}};
    if (r.question)
        j["question"] = *r.question;
    if (r.options)
        j["options"] = *r.options;
    if (r.answer_index)
        j["answer_index"] = *r.answer_index;
    if (r.subtitles)
        j["subtitles"] = *r.subtitles;
    j["gt_moments"] = json::array();
    for (const auto& m : r.gt_moments)
        j["gt_moments"].push_back(moment_to_json(m));
    return j;
}

AnnotationRecord annotation_from_json(const json& j) {
    if (!j.is_object())
        throw ValidationError("annotation must be a JSON object");
    AnnotationRecord r;
    r.video_id = field<std::string>(j, "video_id");
    r.duration = field<double>(j, "duration");
    r.query = field<std::string>(j, "query");
    r.question = optional_field<std::string>(j, "question");
    r.options = optional_field<std::vector<std::string>>(j, "options");
    r.answer_index = optional_field<int>(j, "answer_index");
    r.subtitles = optional_field<std::string>(j, "subtitles");
    for (const auto& m : field<json>(j, "gt_moments")) {
        try {
            r.gt_moments.push_back(moment_from_json(m));
        } catch (const Error& e) {
            throw ValidationError(std::string("field 'gt_moments': ") + e.what());
        }
    }
    r.validate();
    return r;
}

std::vector<AnnotationRecord> load_annotations(const fs::path& path) {
    std::vector<AnnotationRecord> out;
    read_jsonl(path, [&](const json& j) { out.push_back(annotation_from_json(j)); });
    return out;
}

void save_annotations(const fs::path& path, const std::vector<AnnotationRecord>& records) {
    std::string text;
    for (const auto& r : records) {
        r.validate();
        text += annotation_to_json(r).dump() + "\n";
    }
    write_file(path, text);
}

void PredictionRecord::validate() const {
    if (video_id.empty())
        throw ValidationError("prediction video_id is empty");
    for (const auto& m : moments) {
        videomind::validate(m);
        if (!m.score)
            throw ValidationError("prediction moments must be scored");
    }
    if (!plan.contains(Role::answerer) && answer)
        throw ValidationError("answer present but the plan has no answerer");
}

json prediction_to_json(const PredictionRecord& p) {
    p.validate();
    json j = {{"video_id", p.video_id}, {"moments", json::array()}};
    for (const auto& m : p.moments)
        j["moments"].push_back(moment_to_json(m));
    if (p.answer)
        j["answer"] = *p.answer;
    j["plan"] = plan_to_json(p.plan);
    if (p.degraded)
        j["degraded"] = true;
    return j;
}

PredictionRecord prediction_from_json(const json& j) {
    if (!j.is_object())
        throw ValidationError("prediction must be a JSON object");
    PredictionRecord p;
    p.video_id = field<std::string>(j, "video_id");
    for (const auto& m : field<json>(j, "moments"))
        p.moments.push_back(moment_from_json(m));
    p.answer = optional_field<std::string>(j, "answer");
    p.plan = parse_plan(field<json>(j, "plan").dump());
    p.degraded = optional_field<bool>(j, "degraded").value_or(false);
    p.validate();
    return p;
}

std::vector<PredictionRecord> load_predictions(const fs::path& path) {
    std::vector<PredictionRecord> out;
    read_jsonl(path, [&](const json& j) { out.push_back(prediction_from_json(j)); });
    return out;
}

void save_predictions(const fs::path& path, const std::vector<PredictionRecord>& records) {
    std::string text;
    for (const auto& p : records)
        text += prediction_to_json(p).dump() + "\n";
    write_file(path, text);
}

void save_features(const fs::path& manifest, const FeatureSequence& f, const RegToken& r) {
    f.validate();
    r.validate(f.d);
    TensorBundle b;
    b.extra = {{"t", f.t}, {"h", f.h}, {"w", f.w}, {"d", f.d}, {"frame_times", f.frame_times}};
    b.tensors.emplace_back("features", Matrix(f.t * f.h * f.w, f.d, f.values));
    b.tensors.emplace_back("reg", Matrix(1, f.d, r.values));
    write_tensor_bundle(manifest, b);
}

std::pair<FeatureSequence, RegToken> load_features(const fs::path& manifest) {
    const TensorBundle b = read_tensor_bundle(manifest);
    FeatureSequence f;
    f.t = field<std::size_t>(b.extra, "t");
    f.h = field<std::size_t>(b.extra, "h");
    f.w = field<std::size_t>(b.extra, "w");
    f.d = field<std::size_t>(b.extra, "d");
    f.frame_times = field<std::vector<double>>(b.extra, "frame_times");
    const Matrix& values = b.at("features");
    if (values.rows != f.t * f.h * f.w || values.cols != f.d)
        throw ShapeError("tensor 'features' shape does not match t*h*w x d");
    const Matrix& reg = b.at("reg");
    if (reg.rows != 1 || reg.cols != f.d)
        throw ShapeError("tensor 'reg' shape does not match 1 x d");
    f.values = values.data;
    f.validate();
    RegToken r{reg.data};
    return {std::move(f), std::move(r)};
}

std::optional<int> parse_answer_letter(std::string_view text, std::size_t option_count) {
    std::size_t i = 0;
    while (i < text.size() && (std::isspace(static_cast<unsigned char>(text[i])) || text[i] == '('))
        ++i;
    if (i >= text.size())
        return std::nullopt;
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(text[i])));
    if (c < 'A' || c > 'Z')
        return std::nullopt;
    // "Because ..." is a word, not a letter.
    if (i + 1 < text.size() && std::isalpha(static_cast<unsigned char>(text[i + 1])))
        return std::nullopt;
    const int index = c - 'A';
    if (static_cast<std::size_t>(index) >= option_count)
        return std::nullopt;
    return index;
}

}  // namespace videomind
