#include "runet/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace runet {
namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const char* what) {
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw std::invalid_argument(std::string("unknown ") + what + " key '" + key + "'");
}

template <typename V>
void take(const nlohmann::json& j, const char* key, V& field) {
    if (j.contains(key)) field = j.at(key).get<V>();
}

}  // namespace

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base) {
    if (!j.is_object()) throw std::invalid_argument("model config must be a JSON object");
    reject_unknown(j,
                   {"input_channels", "input_size", "encoder_filters", "decoder_filters", "cbam_reduction",
                    "seg_classes", "cls_outputs"},
                   "model config");
    try {
        take(j, "input_channels", base.input_channels);
        take(j, "input_size", base.input_size);
        take(j, "encoder_filters", base.encoder_filters);
        take(j, "decoder_filters", base.decoder_filters);
        take(j, "cbam_reduction", base.cbam_reduction);
        take(j, "seg_classes", base.seg_classes);
        take(j, "cls_outputs", base.cls_outputs);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("model config: ") + e.what());
    }
    return base;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base) {
    if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
    try {
        take(j, "stage", base.stage);
        take(j, "epochs", base.epochs);
        take(j, "batch_size", base.batch_size);
        take(j, "lr", base.lr);
        take(j, "beta1", base.beta1);
        take(j, "beta2", base.beta2);
        take(j, "adam_eps", base.adam_eps);
        take(j, "seed", base.seed);
        take(j, "prob_clamp_eps", base.prob_clamp_eps);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("train config: ") + e.what());
    }
    return base;
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
    nlohmann::ordered_json j;
    j["input_channels"] = c.input_channels;
    j["input_size"] = c.input_size;
    j["encoder_filters"] = c.encoder_filters;
    j["decoder_filters"] = c.decoder_filters;
    j["cbam_reduction"] = c.cbam_reduction;
    j["seg_classes"] = c.seg_classes;
    j["cls_outputs"] = c.cls_outputs;
    return j;
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["stage"] = c.stage;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["lr"] = c.lr;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["adam_eps"] = c.adam_eps;
    j["seed"] = c.seed;
    j["prob_clamp_eps"] = c.prob_clamp_eps;
    return j;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

}  // namespace runet
