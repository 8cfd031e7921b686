#include "han/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "han/errors.hpp"

namespace han {

using nlohmann::json;

void Config::validate() const {
    if (d <= 0) throw ConfigError("config: d must be positive");
    if (n_layers < 1) throw ConfigError("config: n_layers must be >= 1");
    if (lr <= 0.0) throw ConfigError("config: lr must be positive");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
    if (slot_loss_weight < 0.0) throw ConfigError("config: slot_loss_weight must be >= 0");
    if (emb_dim < 0) throw ConfigError("config: emb_dim must be >= 0");
    if (grad_clip < 0.0) throw ConfigError("config: grad_clip must be >= 0");
    if (optimizer != "radam" && optimizer != "adam") {
        throw ConfigError("config: optimizer must be 'radam' or 'adam'");
    }
    act_from_string(activation);  // throws on junk
}

namespace {

void assign(Config& c, const std::string& key, const json& v) {
    if (key == "d") c.d = v.get<int>();
    else if (key == "n_layers") c.n_layers = v.get<int>();
    else if (key == "activation") c.activation = v.get<std::string>();
    else if (key == "batch_size") c.batch_size = v.get<int>();
    else if (key == "lr") c.lr = v.get<double>();
    else if (key == "epochs") c.epochs = v.get<int>();
    else if (key == "seed") c.seed = v.get<uint64_t>();
    else if (key == "slot_loss_weight") c.slot_loss_weight = v.get<double>();
    else if (key == "train_data") c.train_data = v.get<std::string>();
    else if (key == "dev_data") c.dev_data = v.get<std::string>();
    else if (key == "emb_dim") c.emb_dim = v.get<int>();
    else if (key == "word_vectors") c.word_vectors = v.get<std::string>();
    else if (key == "optimizer") c.optimizer = v.get<std::string>();
    else if (key == "grad_clip") c.grad_clip = v.get<double>();
    else if (key == "shared_channel_gate") c.shared_channel_gate = v.get<bool>();
    else if (key == "synth_seed") c.synth_seed = v.get<uint64_t>();
    else if (key == "synth_utts") c.synth_utts = v.get<int>();
    else if (key == "synth_intents") c.synth_intents = v.get<int>();
    else if (key == "synth_slot_types") c.synth_slot_types = v.get<int>();
    else if (key == "synth_max_len") c.synth_max_len = v.get<int>();
    else throw ConfigError("config: unknown key '" + key + "'");
}

json parse_scalar(const std::string& raw) {
    if (raw == "true") return true;
    if (raw == "false") return false;
    try {
        size_t pos = 0;
        if (raw.find_first_of(".eE") != std::string::npos) {
            double d = std::stod(raw, &pos);
            if (pos == raw.size()) return d;
        } else {
            long long i = std::stoll(raw, &pos);
            if (pos == raw.size()) return i;
        }
    } catch (const std::exception&) {
    }
    return raw;  // keep as string
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config parse_config(const std::string& text, const std::string& origin) {
    Config c;
    std::string body = trim(text);
    if (!body.empty() && body[0] == '{') {
        json j;
        try {
            j = json::parse(body);
        } catch (const json::exception& e) {
            throw ConfigError(origin + ": bad JSON: " + e.what());
        }
        for (auto it = j.begin(); it != j.end(); ++it) {
            try {
                assign(c, it.key(), it.value());
            } catch (const json::exception& e) {
                throw ConfigError(origin + ": key '" + it.key() + "': " + e.what());
            }
        }
    } else {
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = trim(line);
            if (s.empty() || s[0] == '#') continue;
            size_t eq = s.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
            }
            std::string key = trim(s.substr(0, eq));
            std::string raw = trim(s.substr(eq + 1));
            try {
                assign(c, key, parse_scalar(raw));
            } catch (const json::exception& e) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }
    c.validate();
    return c;
}

Config load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    Config c = parse_config(buf.str(), path);
    if (const char* env = std::getenv("HAN_SEED")) {
        try {
            c.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("HAN_SEED must be an unsigned integer, got '" + std::string(env) + "'");
        }
    }
    return c;
}

std::string config_to_json_string(const Config& c) {
    json j;
    j["d"] = c.d;
    j["n_layers"] = c.n_layers;
    j["activation"] = c.activation;
    j["batch_size"] = c.batch_size;
    j["lr"] = c.lr;
    j["epochs"] = c.epochs;
    j["seed"] = c.seed;
    j["slot_loss_weight"] = c.slot_loss_weight;
    j["train_data"] = c.train_data;
    j["dev_data"] = c.dev_data;
    j["emb_dim"] = c.emb_dim;
    j["word_vectors"] = c.word_vectors;
    j["optimizer"] = c.optimizer;
    j["grad_clip"] = c.grad_clip;
    j["shared_channel_gate"] = c.shared_channel_gate;
    j["synth_seed"] = c.synth_seed;
    j["synth_utts"] = c.synth_utts;
    j["synth_intents"] = c.synth_intents;
    j["synth_slot_types"] = c.synth_slot_types;
    j["synth_max_len"] = c.synth_max_len;
    return j.dump(2);
}

}  // namespace han
