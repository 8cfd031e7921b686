#pragma once

#include <string>
#include <vector>

#include "han/bilinear_block.hpp"
#include "han/param_store.hpp"
#include "han/tape.hpp"

namespace han {

// One cross-attending sublayer: each stream projects to Q/K/V with bias-free
// linear maps, the intent stream attends over the slot stream's keys/values
// (and vice versa), then residual + layer norm.
struct StreamNames {
    std::string w_q, w_k, w_v;  // d x d projections
    BlockNames block;
    std::string ln_gain, ln_bias;  // 1 x d
};

struct LayerNames {
    StreamNames intent;
    StreamNames slot;
};

struct EncoderNames {
    std::vector<LayerNames> layers;
};

EncoderNames init_encoder_params(ParamStore& ps, const std::string& prefix, int n_layers, int d, Rng& rng);

struct StreamVars {
    Var w_q, w_k, w_v;
    BlockVars block;
    Var ln_gain, ln_bias;
};

struct LayerVars {
    StreamVars intent;
    StreamVars slot;
};

LayerVars bind_layer(BoundParams& bp, const LayerNames& names, Act act, bool shared_channel_gate);

struct LayerTraces {
    BlockTrace intent;
    BlockTrace slot;
};

struct LayerOutput {
    Var h_intent, h_slot;  // n x d
    Var q_intent, q_slot;  // the layer's queries, kept for fusion
    LayerTraces traces;
};

LayerOutput encoder_layer(Tape& t, Var h_intent, Var h_slot, const LayerVars& v, bool want_trace = false);

struct EncoderOutput {
    Var h_intent, h_slot;
    Var q_intent, q_slot;  // final-layer queries
    std::vector<LayerTraces> traces;
};

EncoderOutput run_encoder(Tape& t, Var h_intent, Var h_slot, const std::vector<LayerVars>& layers,
                          bool want_trace = false);

// Gated fusion of the two streams followed by a shared position-wise FFN and
// stream-specific residual + layer norm.
struct FusionNames {
    std::string w_intent, w_slot;  // 2d x d
    std::string b_intent, b_slot;  // 1 x d
    std::string ffn_w1, ffn_b1;    // d x d_ff, 1 x d_ff
    std::string ffn_w2, ffn_b2;    // d_ff x d, 1 x d
    std::string ln_intent_gain, ln_intent_bias;
    std::string ln_slot_gain, ln_slot_bias;
};

FusionNames init_fusion_params(ParamStore& ps, const std::string& prefix, int d, int d_ff, Rng& rng);

struct FusionVars {
    Var w_intent, w_slot, b_intent, b_slot;
    Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Var ln_intent_gain, ln_intent_bias, ln_slot_gain, ln_slot_bias;
};

FusionVars bind_fusion(BoundParams& bp, const FusionNames& names);

struct FusionOutput {
    Var h_intent, h_slot;          // n x d updated streams
    Var alpha_intent, alpha_slot;  // n x d gates in (0,1)
    Var fused;                     // n x d gated sum of the two streams
};

FusionOutput dynamic_fuse(Tape& t, Var q_intent, Var h_intent, Var q_slot, Var h_slot, const FusionVars& v);

}  // namespace han
