#include "videomind/weights_io.hpp"

#include "videomind/config.hpp"
#include "videomind/error.hpp"
#include "videomind/io.hpp"

namespace videomind {

void save_weights(const std::filesystem::path& manifest, const DecoderWeights& w, const DecoderConfig& cfg) {
    validate_weights(w, cfg);
    TensorBundle b;
    b.extra["config"] = decoder_config_to_json(cfg);
    w.visit([&](const std::string& name, const Matrix& t) { b.tensors.emplace_back(name, t); });
    write_tensor_bundle(manifest, b);
}

std::pair<DecoderWeights, DecoderConfig> load_weights(const std::filesystem::path& manifest) {
    TensorBundle b = read_tensor_bundle(manifest);
    if (!b.extra.contains("config"))
        throw ValidationError(manifest.string() + ": manifest has no config");
    const DecoderConfig cfg = decoder_config_from_json(b.extra.at("config"));
    cfg.validate();

    DecoderWeights w = zero_decoder_weights(cfg);
    std::size_t matched = 0;
    w.visit([&](const std::string& name, Matrix& slot) {
        const Matrix& t = b.at(name);
        if (t.rows != slot.rows || t.cols != slot.cols)
            throw ShapeError("tensor '" + name + "' has shape " + std::to_string(t.rows) + "x" +
                             std::to_string(t.cols) + ", config expects " + std::to_string(slot.rows) + "x" +
                             std::to_string(slot.cols));
        slot = t;
        ++matched;
    });
    if (matched != b.tensors.size())
        throw ValidationError(manifest.string() + ": manifest lists tensors the config does not define");
    validate_weights(w, cfg);
    return {std::move(w), cfg};
}

}  // namespace videomind
