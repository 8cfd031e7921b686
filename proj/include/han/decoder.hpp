#pragma once

#include <string>
#include <vector>

#include "han/matrix.hpp"
#include "han/param_store.hpp"
#include "han/tape.hpp"

namespace han {

class Rng;

// Intent projection, slot emission projection, and linear-chain CRF scores.
// Start transitions are an explicit vector; there are no stop transitions.
struct DecoderNames {
    std::string w_intent;     // d x |I|
    std::string b_intent;     // 1 x |I|
    std::string w_slot;       // d x |L|
    std::string b_slot;       // 1 x |L|
    std::string transitions;  // |L| x |L|
    std::string start;        // 1 x |L|
};

DecoderNames init_decoder_params(ParamStore& ps, const std::string& prefix, int d, int n_intents, int n_slots,
                                 Rng& rng);

struct DecoderVars {
    Var w_intent, b_intent, w_slot, b_slot, transitions, start;
};

DecoderVars bind_decoder(BoundParams& bp, const DecoderNames& names);

// c = column-wise max over rows of h_intent; logits = c * W + b.
Var intent_logits(Tape& t, Var h_intent, Var w_intent, Var b_intent);

// Softmax of the intent logits as a plain distribution.
Matrix intent_distribution(const Matrix& logits);

// Emission scores O_S = h_slot * W + b, one row per token.
Var slot_emissions(Tape& t, Var h_slot, Var w_slot, Var b_slot);

// --- Linear-chain CRF on plain matrices (decode/eval path) ---

// Score of one label sequence: start[y0] + sum_t O[t,yt] + sum_t T[y(t-1),yt].
double crf_path_score(const Matrix& emissions, const Matrix& transitions, const Matrix& start,
                      const std::vector<int>& labels);

// log sum over all |L|^n label sequences of exp(path score), via the
// forward algorithm in log space.
double crf_log_partition(const Matrix& emissions, const Matrix& transitions, const Matrix& start);

// Negative log-likelihood of the gold sequence; always >= 0.
double crf_nll(const Matrix& emissions, const Matrix& transitions, const Matrix& start,
               const std::vector<int>& gold);

struct ViterbiResult {
    std::vector<int> labels;
    double score;
};

// Max-scoring label sequence; ties break toward the lower label index.
ViterbiResult viterbi(const Matrix& emissions, const Matrix& transitions, const Matrix& start);

// --- Tape (training) path ---

// Same quantity as crf_log_partition, composed from differentiable ops.
Var crf_log_partition_var(Tape& t, Var emissions, Var transitions, Var start);

Var crf_nll_var(Tape& t, Var emissions, Var transitions, Var start, const std::vector<int>& gold);

// cross_entropy(intent) + weight * crf_nll
Var joint_loss(Tape& t, Var logits, int gold_intent, Var crf_nll_value, double weight);

struct Prediction {
    int intent = -1;
    Matrix intent_dist;       // 1 x |I|
    std::vector<int> slots;
    double path_score = 0.0;
};

}  // namespace han
