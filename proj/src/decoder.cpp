#include "han/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "han/errors.hpp"
#include "han/rng.hpp"

namespace han {

DecoderNames init_decoder_params(ParamStore& ps, const std::string& prefix, int d, int n_intents, int n_slots,
                                 Rng& rng) {
    if (n_intents < 2) throw ConfigError("decoder: need at least 2 intent labels");
    if (n_slots < 1) throw ConfigError("decoder: need at least 1 slot label");
    DecoderNames n;
    n.w_intent = prefix + ".w_intent";
    n.b_intent = prefix + ".b_intent";
    n.w_slot = prefix + ".w_slot";
    n.b_slot = prefix + ".b_slot";
    n.transitions = prefix + ".transitions";
    n.start = prefix + ".start";
    ps.create(n.w_intent, xavier_uniform(d, n_intents, d, n_intents, rng));
    ps.create(n.b_intent, Matrix(1, n_intents));
    ps.create(n.w_slot, xavier_uniform(d, n_slots, d, n_slots, rng));
    ps.create(n.b_slot, Matrix(1, n_slots));
    ps.create(n.transitions, xavier_uniform(n_slots, n_slots, n_slots, n_slots, rng));
    ps.create(n.start, Matrix(1, n_slots));
    return n;
}

DecoderVars bind_decoder(BoundParams& bp, const DecoderNames& names) {
    return DecoderVars{bp(names.w_intent), bp(names.b_intent), bp(names.w_slot),
                       bp(names.b_slot),   bp(names.transitions), bp(names.start)};
}

Var intent_logits(Tape& t, Var h_intent, Var w_intent, Var b_intent) {
    Var pooled = t.max_rows(h_intent);
    return t.add(t.matmul(pooled, w_intent), b_intent);
}

Matrix intent_distribution(const Matrix& logits) {
    Tape t(false);
    return t.val(t.softmax_rows(t.leaf(logits)));
}

Var slot_emissions(Tape& t, Var h_slot, Var w_slot, Var b_slot) {
    return t.add_row_broadcast(t.matmul(h_slot, w_slot), b_slot);
}

namespace {

void check_crf_shapes(const Matrix& emissions, const Matrix& transitions, const Matrix& start) {
    int L = emissions.cols();
    if (emissions.rows() < 1) throw ShapeError("crf: need at least one position");
    if (transitions.rows() != L || transitions.cols() != L) {
        throw ShapeError("crf: transitions must be " + std::to_string(L) + "x" + std::to_string(L));
    }
    if (start.rows() != 1 || start.cols() != L) {
        throw ShapeError("crf: start must be 1x" + std::to_string(L));
    }
}

double logsumexp(const std::vector<double>& xs) {
    double mx = *std::max_element(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace

double crf_path_score(const Matrix& emissions, const Matrix& transitions, const Matrix& start,
                      const std::vector<int>& labels) {
    check_crf_shapes(emissions, transitions, start);
    int n = emissions.rows(), L = emissions.cols();
    if (static_cast<int>(labels.size()) != n) throw ShapeError("crf: label count != sequence length");
    for (int y : labels) {
        if (y < 0 || y >= L) throw ShapeError("crf: label " + std::to_string(y) + " out of range");
    }
    double s = start.at(0, labels[0]) + emissions.at(0, labels[0]);
    for (int t = 1; t < n; ++t) {
        s += transitions.at(labels[t - 1], labels[t]) + emissions.at(t, labels[t]);
    }
    return s;
}

double crf_log_partition(const Matrix& emissions, const Matrix& transitions, const Matrix& start) {
    check_crf_shapes(emissions, transitions, start);
    int n = emissions.rows(), L = emissions.cols();
    std::vector<double> alpha(L), next(L), tmp(L);
    for (int j = 0; j < L; ++j) alpha[j] = start.at(0, j) + emissions.at(0, j);
    for (int t = 1; t < n; ++t) {
        for (int j = 0; j < L; ++j) {
            for (int i = 0; i < L; ++i) tmp[i] = alpha[i] + transitions.at(i, j);
            next[j] = logsumexp(tmp) + emissions.at(t, j);
        }
        std::swap(alpha, next);
    }
    return logsumexp(alpha);
}

double crf_nll(const Matrix& emissions, const Matrix& transitions, const Matrix& start,
               const std::vector<int>& gold) {
    double nll =
        crf_log_partition(emissions, transitions, start) - crf_path_score(emissions, transitions, start, gold);
    // the partition dominates any single path; clamp away forward-recursion
    // rounding when the gold path carries all the mass
    return std::max(0.0, nll);
}

ViterbiResult viterbi(const Matrix& emissions, const Matrix& transitions, const Matrix& start) {
    check_crf_shapes(emissions, transitions, start);
    int n = emissions.rows(), L = emissions.cols();
    std::vector<double> score(L), next(L);
    std::vector<std::vector<int>> back(n, std::vector<int>(L, 0));
    for (int j = 0; j < L; ++j) score[j] = start.at(0, j) + emissions.at(0, j);
    for (int t = 1; t < n; ++t) {
        for (int j = 0; j < L; ++j) {
            double best = -std::numeric_limits<double>::infinity();
            int best_i = 0;
            for (int i = 0; i < L; ++i) {
                double s = score[i] + transitions.at(i, j);
                if (s > best) {  // strict: ties keep the lower i
                    best = s;
                    best_i = i;
                }
            }
            next[j] = best + emissions.at(t, j);
            back[t][j] = best_i;
        }
        std::swap(score, next);
    }
    int last = 0;
    for (int j = 1; j < L; ++j) {
        if (score[j] > score[last]) last = j;
    }
    ViterbiResult r;
    r.score = score[last];
    r.labels.assign(n, 0);
    r.labels[n - 1] = last;
    for (int t = n - 1; t > 0; --t) r.labels[t - 1] = back[t][r.labels[t]];
    return r;
}

Var crf_log_partition_var(Tape& t, Var emissions, Var transitions, Var start) {
    check_crf_shapes(t.val(emissions), t.val(transitions), t.val(start));
    int n = t.val(emissions).rows();
    // alpha: 1 x L in log space
    Var alpha = t.add(start, t.slice_rows(emissions, 0, 1));
    for (int step = 1; step < n; ++step) {
        Var scores = t.add_col_broadcast(transitions, t.transpose(alpha));
        alpha = t.add(t.logsumexp_cols(scores), t.slice_rows(emissions, step, step + 1));
    }
    return t.logsumexp_cols(t.transpose(alpha));
}

Var crf_nll_var(Tape& t, Var emissions, Var transitions, Var start, const std::vector<int>& gold) {
    Var log_z = crf_log_partition_var(t, emissions, transitions, start);
    Var gold_score = t.path_score(emissions, transitions, start, gold);
    return t.add(log_z, t.scale(gold_score, -1.0));
}

Var joint_loss(Tape& t, Var logits, int gold_intent, Var crf_nll_value, double weight) {
    Var ce = t.cross_entropy_logits(logits, gold_intent);
    return t.add(ce, t.scale(crf_nll_value, weight));
}

}  // namespace han
