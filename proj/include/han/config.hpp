#pragma once

#include <cstdint>
#include <string>

#include "han/tape.hpp"

namespace han {

// Run configuration. Loadable from JSON or flat key=value text; HAN_SEED in
// the environment overrides `seed`.
struct Config {
    int d = 128;           // hidden size
    int n_layers = 2;      // encoder sublayers
    std::string activation = "elu";
    int batch_size = 32;
    double lr = 1e-3;
    int epochs = 50;
    uint64_t seed = 1;
    double slot_loss_weight = 1.0;

    std::string train_data;  // CoNLL path; empty -> synthetic corpus
    std::string dev_data;    // CoNLL path; empty -> train split

    int emb_dim = 0;  // 0 -> d
    std::string word_vectors;
    std::string optimizer = "radam";  // or "adam"
    double grad_clip = 0.0;           // global L2 cap; 0 -> off
    bool shared_channel_gate = false;

    // synthetic-corpus knobs, used when train_data is empty
    uint64_t synth_seed = 42;
    int synth_utts = 64;
    int synth_intents = 4;
    int synth_slot_types = 3;
    int synth_max_len = 6;

    void validate() const;
    Act act() const { return act_from_string(activation); }
    int effective_emb_dim() const { return emb_dim > 0 ? emb_dim : d; }
};

Config parse_config(const std::string& text, const std::string& origin);
Config load_config(const std::string& path);  // applies HAN_SEED override
std::string config_to_json_string(const Config& c);

}  // namespace han
