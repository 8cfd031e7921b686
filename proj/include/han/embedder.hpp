#pragma once

#include <string>
#include <vector>

#include "han/param_store.hpp"
#include "han/tape.hpp"
#include "han/vocab.hpp"

namespace han {

class Rng;

// Shared BiLSTM over token embeddings plus label attention onto learnable
// intent/slot label embeddings, producing the intent-aware and slot-aware
// token matrices.
struct EmbedderNames {
    std::string token_table;  // |V| x d_emb
    // per direction: gates packed [input, forget, cell, output]
    std::string fwd_wx, fwd_wh, fwd_b;  // d_emb x 4h, h x 4h, 1 x 4h
    std::string bwd_wx, bwd_wh, bwd_b;
    std::string proj_w, proj_b;  // 2h x d, 1 x d
    std::string label_proj;      // d x d, applied before label attention
    std::string intent_table;    // |I| x d
    std::string slot_table;      // |L| x d
    int d_emb = 0;
    int hidden = 0;  // per-direction LSTM width (= d)
};

EmbedderNames init_embedder_params(ParamStore& ps, const std::string& prefix, int vocab_size, int d_emb, int d,
                                   int n_intents, int n_slots, Rng& rng);

struct EmbedderVars {
    Var token_table;
    Var fwd_wx, fwd_wh, fwd_b;
    Var bwd_wx, bwd_wh, bwd_b;
    Var proj_w, proj_b;
    Var label_proj;
    Var intent_table;
    Var slot_table;
    int hidden = 0;
};

EmbedderVars bind_embedder(BoundParams& bp, const EmbedderNames& names);

// Row i is the embedding of token i.
Var embed_tokens(Tape& t, Var token_table, const std::vector<int>& ids);

// Forward+backward LSTM states, concatenated per position (n x 2h).
// Zero initial states; standard sigmoid gates with tanh cell candidate.
Var bilstm_states(Tape& t, Var x, const EmbedderVars& v);

// bilstm_states followed by the output projection to d.
Var bilstm(Tape& t, Var x, const EmbedderVars& v);

struct LabelAttention {
    Var output;   // n x d
    Var weights;  // n x m, rows sum to 1
};

// Scaled dot-product attention from hidden rows onto label embeddings:
// A = softmax(h * table^T / sqrt(d)), output = A * table.
LabelAttention label_attention(Tape& t, Var h, Var label_table);

struct EmbedderOutput {
    Var h;         // n x d shared encoding
    Var h_intent;  // n x d
    Var h_slot;    // n x d
    Var intent_weights;
    Var slot_weights;
};

// Full pipeline: embed -> bilstm -> label projection -> label attention
// against the intent table and the slot table.
EmbedderOutput run_embedder(Tape& t, const EmbedderVars& v, const std::vector<int>& token_ids);

// Plain-text word vectors: one token per line followed by d_emb reals.
// Returns the number of vocabulary rows overwritten in `table`.
int load_word_vectors(const std::string& path, const Vocab& vocab, Matrix& table);

}  // namespace han
