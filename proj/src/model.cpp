#include "han/model.hpp"

#include <algorithm>

#include "han/errors.hpp"
#include "han/rng.hpp"

namespace han {

Model::Model(Config cfg, Vocab vocab, std::vector<std::string> intent_labels, std::vector<std::string> slot_labels)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)), intents_(std::move(intent_labels)),
      slots_(std::move(slot_labels)) {
    cfg_.validate();
    if (intents_.size() < 2) throw ConfigError("model: need at least 2 intent labels");
    if (slots_.empty()) throw ConfigError("model: need at least 1 slot label");

    Rng rng(cfg_.seed);
    int d = cfg_.d;
    embedder_ = init_embedder_params(store_, "embedder", vocab_.size(), cfg_.effective_emb_dim(), d,
                                     static_cast<int>(intents_.size()), static_cast<int>(slots_.size()), rng);
    encoder_ = init_encoder_params(store_, "encoder", cfg_.n_layers, d, rng);
    fusion_ = init_fusion_params(store_, "fusion", d, 2 * d, rng);
    decoder_ = init_decoder_params(store_, "decoder", d, static_cast<int>(intents_.size()),
                                   static_cast<int>(slots_.size()), rng);

    if (!cfg_.word_vectors.empty()) {
        load_word_vectors(cfg_.word_vectors, vocab_, store_.value(embedder_.token_table));
    }
}

Model Model::from_dataset(Config cfg, const Dataset& ds) {
    if (ds.utterances.empty()) throw ConfigError("model: training dataset is empty");
    return Model(std::move(cfg), ds.vocab, ds.intent_labels, ds.slot_labels);
}

Model::Forward Model::forward(Tape& t, const std::vector<int>& token_ids, bool want_trace) {
    if (token_ids.empty()) throw ShapeError("forward: empty token sequence");
    BoundParams bp(t, store_);
    EmbedderVars ev = bind_embedder(bp, embedder_);
    std::vector<LayerVars> layers;
    layers.reserve(encoder_.layers.size());
    for (const auto& ln : encoder_.layers) {
        layers.push_back(bind_layer(bp, ln, cfg_.act(), cfg_.shared_channel_gate));
    }
    FusionVars fv = bind_fusion(bp, fusion_);
    DecoderVars dv = bind_decoder(bp, decoder_);

    EmbedderOutput emb = run_embedder(t, ev, token_ids);
    EncoderOutput enc = run_encoder(t, emb.h_intent, emb.h_slot, layers, want_trace);
    FusionOutput fus = dynamic_fuse(t, enc.q_intent, enc.h_intent, enc.q_slot, enc.h_slot, fv);

    Forward f{intent_logits(t, fus.h_intent, dv.w_intent, dv.b_intent),
              slot_emissions(t, fus.h_slot, dv.w_slot, dv.b_slot), dv, std::move(bp), ModelTrace{}};
    if (want_trace) {
        for (auto& lt : enc.traces) {
            ModelTrace::Layer layer;
            layer.intent = StreamTraceOut{std::move(lt.intent.beta_s), std::move(lt.intent.beta_c)};
            layer.slot = StreamTraceOut{std::move(lt.slot.beta_s), std::move(lt.slot.beta_c)};
            f.trace.layers.push_back(std::move(layer));
        }
    }
    return f;
}

Var Model::loss(Tape& t, const Forward& f, int gold_intent, const std::vector<int>& gold_slots) {
    Var nll = crf_nll_var(t, f.emissions, f.decoder.transitions, f.decoder.start, gold_slots);
    return joint_loss(t, f.logits, gold_intent, nll, cfg_.slot_loss_weight);
}

double Model::accumulate_gradients(const Utterance& u) {
    Tape t;
    Forward f = forward(t, token_ids(u.tokens));
    Var l = loss(t, f, gold_intent_id(u), gold_slot_ids(u));
    t.backward(l);
    f.bound.flush_grads();
    return t.val(l).at(0, 0);
}

double Model::utterance_loss(const Utterance& u) {
    Tape t(false);
    Forward f = forward(t, token_ids(u.tokens));
    Var l = loss(t, f, gold_intent_id(u), gold_slot_ids(u));
    return t.val(l).at(0, 0);
}

Prediction Model::predict_ids(const std::vector<int>& ids) {
    Tape t(false);
    Forward f = forward(t, ids);
    Prediction p;
    p.intent_dist = intent_distribution(t.val(f.logits));
    p.intent = 0;
    for (int j = 1; j < p.intent_dist.cols(); ++j) {
        if (p.intent_dist.at(0, j) > p.intent_dist.at(0, p.intent)) p.intent = j;
    }
    ViterbiResult v = viterbi(t.val(f.emissions), t.val(f.decoder.transitions), t.val(f.decoder.start));
    p.slots = std::move(v.labels);
    p.path_score = v.score;
    return p;
}

PredictedUtterance Model::predict(const std::vector<std::string>& tokens) {
    Prediction p = predict_ids(token_ids(tokens));
    PredictedUtterance out;
    out.intent = intents_.at(p.intent);
    out.slots.reserve(p.slots.size());
    for (int s : p.slots) out.slots.push_back(slots_.at(s));
    return out;
}

EvalReport Model::evaluate(const Dataset& ds) {
    std::vector<PredictedUtterance> preds;
    preds.reserve(ds.utterances.size());
    for (const auto& u : ds.utterances) preds.push_back(predict(u.tokens));
    return evaluate_predictions(ds.utterances, preds);
}

ModelTrace Model::attention_trace(const std::vector<int>& ids) {
    Tape t(false);
    return forward(t, ids, true).trace;
}

std::vector<int> Model::token_ids(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& tok : tokens) ids.push_back(vocab_.id(tok));
    return ids;
}

std::vector<int> Model::gold_slot_ids(const Utterance& u) const {
    std::vector<int> ids;
    ids.reserve(u.slots.size());
    for (const auto& s : u.slots) {
        auto it = std::find(slots_.begin(), slots_.end(), s);
        if (it == slots_.end()) throw Error("slot label '" + s + "' is not in the model inventory");
        ids.push_back(static_cast<int>(it - slots_.begin()));
    }
    return ids;
}

int Model::gold_intent_id(const Utterance& u) const {
    for (size_t j = 0; j < intents_.size(); ++j) {
        if (intents_[j] == u.intent) return static_cast<int>(j);
    }
    throw Error("intent label '" + u.intent + "' is not in the model inventory");
}

}  // namespace han
