#pragma once

#include <string>
#include <vector>

#include "han/matrix.hpp"
#include "han/param_store.hpp"
#include "han/tape.hpp"

namespace han {

class Rng;

// Weights of one BiLinear attention block. The pooling activation (`act`)
// applies to the query-key and query-value bilinear maps; the transformation
// applied on top of the pooled query-key map is always ReLU.
struct BlockNames {
    std::string w_k, w_q_k;  // d x d key-side / query-side pooling
    std::string w_b_k;       // d x d transformation
    std::string w_b;         // 1 x d contextual scoring row
    std::string w_e;         // d x d channel excitation
    std::string w_v, w_q_v;  // d x d value-side / query-side pooling
};

BlockNames init_block_params(ParamStore& ps, const std::string& prefix, int d, Rng& rng);

struct BlockVars {
    Var w_k, w_q_k, w_b_k, w_b, w_e, w_v, w_q_v;
    Act act = Act::Elu;
    // When set, one channel gate is computed from the pooled query-key maps
    // of all queries instead of per query.
    bool shared_channel_gate = false;
};

BlockVars bind_block(BoundParams& bp, const BlockNames& names, Act act, bool shared_channel_gate = false);

// Attention internals kept for inspection and the attention-dump export.
struct BlockTrace {
    Matrix beta_s;                      // n_q x n_kv contextual weights, rows sum to 1
    Matrix beta_c;                      // n_q x d channel gates in (0,1)
    std::vector<Matrix> bilinear_qk;    // per query: n_kv x d (pooled query-key maps)
    std::vector<Matrix> transformed_qk; // per query: n_kv x d (after ReLU transformation)
};

// act(a * Wa^T) ⊙ act(b * Wb^T) for row vectors a, b.
Var bilinear_pool(Tape& t, Var a, Var b, Var wa, Var wb, Act act);

struct ContextualAttention {
    Var weights;         // 1 x n, sums to 1
    Var transformed_qk;  // n x d
    Var bilinear_qk;     // n x d
};

// Pool each key with the query, transform with ReLU, score each position
// with the 1xd scoring row, normalize with a softmax.
ContextualAttention contextual_attention(Tape& t, Var q, Var keys, const BlockVars& v);

// Squeeze (mean over positions) then sigmoid excitation: 1 x d gate.
Var channel_attention(Tape& t, Var transformed_qk, Var w_e);

struct AttendResult {
    Var v_hat;  // 1 x d
    Var beta_s;
    Var beta_c;
    Var bilinear_qk;
    Var transformed_qk;
};

// One query against all key/value pairs: v_hat = beta_c ⊙ sum_i beta_s_i B_i^v.
AttendResult attend(Tape& t, Var q, Var keys, Var values, const BlockVars& v);

struct BlockOutput {
    Var v_hat;  // n_q x d
    BlockTrace trace;
};

// Runs attend for every query row. Keys and values must have equal row
// counts; the query count may differ.
BlockOutput f_bilinear(Tape& t, Var keys, Var values, Var queries, const BlockVars& v, bool want_trace = false);

}  // namespace han
