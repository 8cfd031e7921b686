#pragma once

#include <string>
#include <vector>

#include "han/config.hpp"
#include "han/corpus.hpp"
#include "han/decoder.hpp"
#include "han/embedder.hpp"
#include "han/encoder.hpp"
#include "han/param_store.hpp"
#include "han/vocab.hpp"

namespace han {

struct StreamTraceOut {
    Matrix beta_s;  // n x n
    Matrix beta_c;  // n x d
};

struct ModelTrace {
    struct Layer {
        StreamTraceOut intent;
        StreamTraceOut slot;
    };
    std::vector<Layer> layers;
};

// The assembled network: embedder -> higher-order attention encoder ->
// dynamic feature fusion -> intent/CRF decoder, owning all parameters.
class Model {
public:
    Model(Config cfg, Vocab vocab, std::vector<std::string> intent_labels, std::vector<std::string> slot_labels);

    // Builds vocabulary and label inventories from a training split.
    static Model from_dataset(Config cfg, const Dataset& ds);

    struct Forward {
        Var logits;     // 1 x |I|
        Var emissions;  // n x |L|
        DecoderVars decoder;
        BoundParams bound;
        ModelTrace trace;
    };

    Forward forward(Tape& t, const std::vector<int>& token_ids, bool want_trace = false);

    Var loss(Tape& t, const Forward& f, int gold_intent, const std::vector<int>& gold_slots);

    // Forward + joint loss + backward; gradients accumulate into the store.
    double accumulate_gradients(const Utterance& u);

    // No-grad forward returning the joint loss value.
    double utterance_loss(const Utterance& u);

    Prediction predict_ids(const std::vector<int>& token_ids);
    PredictedUtterance predict(const std::vector<std::string>& tokens);
    EvalReport evaluate(const Dataset& ds);
    ModelTrace attention_trace(const std::vector<int>& token_ids);

    std::vector<int> token_ids(const std::vector<std::string>& tokens) const;
    std::vector<int> gold_slot_ids(const Utterance& u) const;
    int gold_intent_id(const Utterance& u) const;

    const Config& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const Vocab& vocab() const { return vocab_; }
    const std::vector<std::string>& intent_labels() const { return intents_; }
    const std::vector<std::string>& slot_labels() const { return slots_; }

private:
    Config cfg_;
    Vocab vocab_;
    std::vector<std::string> intents_;
    std::vector<std::string> slots_;
    ParamStore store_;
    EmbedderNames embedder_;
    EncoderNames encoder_;
    FusionNames fusion_;
    DecoderNames decoder_;
};

}  // namespace han
