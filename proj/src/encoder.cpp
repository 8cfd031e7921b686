#include "han/encoder.hpp"

#include "han/errors.hpp"
#include "han/rng.hpp"

namespace han {

namespace {

StreamNames init_stream(ParamStore& ps, const std::string& prefix, int d, Rng& rng) {
    StreamNames s;
    s.w_q = prefix + ".w_q";
    s.w_k = prefix + ".w_k";
    s.w_v = prefix + ".w_v";
    for (const auto* name : {&s.w_q, &s.w_k, &s.w_v}) ps.create(*name, xavier_uniform(d, d, d, d, rng));
    s.block = init_block_params(ps, prefix + ".block", d, rng);
    s.ln_gain = prefix + ".ln_gain";
    s.ln_bias = prefix + ".ln_bias";
    ps.create(s.ln_gain, Matrix::full(1, d, 1.0));
    ps.create(s.ln_bias, Matrix(1, d));
    return s;
}

StreamVars bind_stream(BoundParams& bp, const StreamNames& n, Act act, bool shared_gate) {
    StreamVars v;
    v.w_q = bp(n.w_q);
    v.w_k = bp(n.w_k);
    v.w_v = bp(n.w_v);
    v.block = bind_block(bp, n.block, act, shared_gate);
    v.ln_gain = bp(n.ln_gain);
    v.ln_bias = bp(n.ln_bias);
    return v;
}

}  // namespace

EncoderNames init_encoder_params(ParamStore& ps, const std::string& prefix, int n_layers, int d, Rng& rng) {
    if (n_layers < 1) throw ConfigError("encoder: need at least one layer");
    EncoderNames names;
    for (int l = 0; l < n_layers; ++l) {
        std::string p = prefix + ".l" + std::to_string(l);
        LayerNames layer;
        layer.intent = init_stream(ps, p + ".intent", d, rng);
        layer.slot = init_stream(ps, p + ".slot", d, rng);
        names.layers.push_back(std::move(layer));
    }
    return names;
}

LayerVars bind_layer(BoundParams& bp, const LayerNames& n, Act act, bool shared_gate) {
    return LayerVars{bind_stream(bp, n.intent, act, shared_gate), bind_stream(bp, n.slot, act, shared_gate)};
}

LayerOutput encoder_layer(Tape& t, Var h_intent, Var h_slot, const LayerVars& v, bool want_trace) {
    check_same_shape(t.val(h_intent), t.val(h_slot), "encoder_layer");
    Var q_i = t.matmul_nt(h_intent, v.intent.w_q);
    Var k_i = t.matmul_nt(h_intent, v.intent.w_k);
    Var v_i = t.matmul_nt(h_intent, v.intent.w_v);
    Var q_s = t.matmul_nt(h_slot, v.slot.w_q);
    Var k_s = t.matmul_nt(h_slot, v.slot.w_k);
    Var v_s = t.matmul_nt(h_slot, v.slot.w_v);

    // Cross-stream attention: intent queries over slot keys/values and the
    // symmetric direction, each followed by residual + LN.
    BlockOutput attended_i = f_bilinear(t, k_s, v_s, q_i, v.intent.block, want_trace);
    BlockOutput attended_s = f_bilinear(t, k_i, v_i, q_s, v.slot.block, want_trace);

    LayerOutput out;
    out.h_intent = t.layer_norm(t.add(h_intent, attended_i.v_hat), v.intent.ln_gain, v.intent.ln_bias);
    out.h_slot = t.layer_norm(t.add(h_slot, attended_s.v_hat), v.slot.ln_gain, v.slot.ln_bias);
    out.q_intent = q_i;
    out.q_slot = q_s;
    if (want_trace) {
        out.traces.intent = std::move(attended_i.trace);
        out.traces.slot = std::move(attended_s.trace);
    }
    return out;
}

EncoderOutput run_encoder(Tape& t, Var h_intent, Var h_slot, const std::vector<LayerVars>& layers,
                          bool want_trace) {
    if (layers.empty()) throw ConfigError("run_encoder: no layers");
    EncoderOutput out;
    out.h_intent = h_intent;
    out.h_slot = h_slot;
    for (const auto& layer : layers) {
        LayerOutput lo = encoder_layer(t, out.h_intent, out.h_slot, layer, want_trace);
        out.h_intent = lo.h_intent;
        out.h_slot = lo.h_slot;
        out.q_intent = lo.q_intent;
        out.q_slot = lo.q_slot;
        if (want_trace) out.traces.push_back(std::move(lo.traces));
    }
    return out;
}

FusionNames init_fusion_params(ParamStore& ps, const std::string& prefix, int d, int d_ff, Rng& rng) {
    FusionNames n;
    n.w_intent = prefix + ".w_intent";
    n.w_slot = prefix + ".w_slot";
    n.b_intent = prefix + ".b_intent";
    n.b_slot = prefix + ".b_slot";
    n.ffn_w1 = prefix + ".ffn_w1";
    n.ffn_b1 = prefix + ".ffn_b1";
    n.ffn_w2 = prefix + ".ffn_w2";
    n.ffn_b2 = prefix + ".ffn_b2";
    n.ln_intent_gain = prefix + ".ln_intent_gain";
    n.ln_intent_bias = prefix + ".ln_intent_bias";
    n.ln_slot_gain = prefix + ".ln_slot_gain";
    n.ln_slot_bias = prefix + ".ln_slot_bias";
    ps.create(n.w_intent, xavier_uniform(2 * d, d, 2 * d, d, rng));
    ps.create(n.w_slot, xavier_uniform(2 * d, d, 2 * d, d, rng));
    ps.create(n.b_intent, Matrix(1, d));
    ps.create(n.b_slot, Matrix(1, d));
    ps.create(n.ffn_w1, xavier_uniform(d, d_ff, d, d_ff, rng));
    ps.create(n.ffn_b1, Matrix(1, d_ff));
    ps.create(n.ffn_w2, xavier_uniform(d_ff, d, d_ff, d, rng));
    ps.create(n.ffn_b2, Matrix(1, d));
    ps.create(n.ln_intent_gain, Matrix::full(1, d, 1.0));
    ps.create(n.ln_intent_bias, Matrix(1, d));
    ps.create(n.ln_slot_gain, Matrix::full(1, d, 1.0));
    ps.create(n.ln_slot_bias, Matrix(1, d));
    return n;
}

FusionVars bind_fusion(BoundParams& bp, const FusionNames& n) {
    FusionVars v;
    v.w_intent = bp(n.w_intent);
    v.w_slot = bp(n.w_slot);
    v.b_intent = bp(n.b_intent);
    v.b_slot = bp(n.b_slot);
    v.ffn_w1 = bp(n.ffn_w1);
    v.ffn_b1 = bp(n.ffn_b1);
    v.ffn_w2 = bp(n.ffn_w2);
    v.ffn_b2 = bp(n.ffn_b2);
    v.ln_intent_gain = bp(n.ln_intent_gain);
    v.ln_intent_bias = bp(n.ln_intent_bias);
    v.ln_slot_gain = bp(n.ln_slot_gain);
    v.ln_slot_bias = bp(n.ln_slot_bias);
    return v;
}

FusionOutput dynamic_fuse(Tape& t, Var q_intent, Var h_intent, Var q_slot, Var h_slot, const FusionVars& v) {
    check_same_shape(t.val(h_intent), t.val(h_slot), "dynamic_fuse");
    Var alpha_i = t.activation(
        t.add_row_broadcast(t.matmul(t.concat_cols(q_intent, h_intent), v.w_intent), v.b_intent), Act::Sigmoid);
    Var alpha_s = t.activation(
        t.add_row_broadcast(t.matmul(t.concat_cols(q_slot, h_slot), v.w_slot), v.b_slot), Act::Sigmoid);
    Var fused = t.add(t.hadamard(alpha_i, h_intent), t.hadamard(alpha_s, h_slot));

    Var inner = t.activation(t.add_row_broadcast(t.matmul(fused, v.ffn_w1), v.ffn_b1), Act::Relu);
    Var ffn = t.add_row_broadcast(t.matmul(inner, v.ffn_w2), v.ffn_b2);

    FusionOutput out;
    out.h_intent = t.layer_norm(t.add(ffn, h_intent), v.ln_intent_gain, v.ln_intent_bias);
    out.h_slot = t.layer_norm(t.add(ffn, h_slot), v.ln_slot_gain, v.ln_slot_bias);
    out.alpha_intent = alpha_i;
    out.alpha_slot = alpha_s;
    out.fused = fused;
    return out;
}

}  // namespace han
