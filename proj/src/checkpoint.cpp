#include "han/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "han/errors.hpp"

namespace han {

using nlohmann::json;

namespace {
constexpr int kVersion = 1;
constexpr const char* kFormat = "han-checkpoint";
}  // namespace

std::string checkpoint_to_string(const Model& model) {
    json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["config"] = json::parse(config_to_json_string(model.config()));
    j["vocab"] = model.vocab().tokens();
    j["intent_labels"] = model.intent_labels();
    j["slot_labels"] = model.slot_labels();
    json params = json::object();
    for (const auto& [name, e] : model.params().entries()) {
        params[name] = {{"rows", e.value.rows()}, {"cols", e.value.cols()}, {"data", e.value.values()}};
    }
    j["params"] = std::move(params);
    return j.dump();
}

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write checkpoint " + path);
    f << checkpoint_to_string(model) << "\n";
}

Model checkpoint_from_string(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(origin + ": bad checkpoint JSON: " + e.what());
    }
    if (!j.contains("format") || j["format"] != kFormat) {
        throw ParseError(origin + ": not a han checkpoint");
    }
    if (!j.contains("version") || j["version"].get<int>() != kVersion) {
        throw ParseError(origin + ": unsupported checkpoint version");
    }
    Config cfg = parse_config(j["config"].dump(), origin + "#config");
    // A checkpoint never re-loads external word vectors; the table is stored.
    cfg.word_vectors.clear();

    Vocab vocab;
    auto tokens = j["vocab"].get<std::vector<std::string>>();
    if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
        throw ParseError(origin + ": vocab must begin with <pad>, <unk>");
    }
    for (size_t i = 2; i < tokens.size(); ++i) vocab.add(tokens[i]);

    Model model(cfg, std::move(vocab), j["intent_labels"].get<std::vector<std::string>>(),
                j["slot_labels"].get<std::vector<std::string>>());

    const json& params = j["params"];
    for (auto& [name, e] : model.params().entries()) {
        if (!params.contains(name)) throw ParseError(origin + ": checkpoint missing parameter " + name);
        const json& p = params[name];
        int rows = p["rows"].get<int>(), cols = p["cols"].get<int>();
        if (rows != e.value.rows() || cols != e.value.cols()) {
            throw ParseError(origin + ": parameter " + name + " has shape " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", expected " + e.value.shape_str());
        }
        auto data = p["data"].get<std::vector<double>>();
        e.value = Matrix(rows, cols, std::move(data));
        check_finite(e.value, "checkpoint load");
    }
    if (params.size() != model.params().size()) {
        throw ParseError(origin + ": checkpoint has " + std::to_string(params.size()) + " parameters, model expects " +
                         std::to_string(model.params().size()));
    }
    return model;
}

Model load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open checkpoint " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return checkpoint_from_string(buf.str(), path);
}

}  // namespace han
