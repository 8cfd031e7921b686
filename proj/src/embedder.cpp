#include "han/embedder.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "han/errors.hpp"
#include "han/rng.hpp"

namespace han {

EmbedderNames init_embedder_params(ParamStore& ps, const std::string& prefix, int vocab_size, int d_emb, int d,
                                   int n_intents, int n_slots, Rng& rng) {
    EmbedderNames n;
    n.d_emb = d_emb;
    n.hidden = d;
    int h = n.hidden;
    n.token_table = prefix + ".token_table";
    n.fwd_wx = prefix + ".fwd.wx";
    n.fwd_wh = prefix + ".fwd.wh";
    n.fwd_b = prefix + ".fwd.b";
    n.bwd_wx = prefix + ".bwd.wx";
    n.bwd_wh = prefix + ".bwd.wh";
    n.bwd_b = prefix + ".bwd.b";
    n.proj_w = prefix + ".proj_w";
    n.proj_b = prefix + ".proj_b";
    n.label_proj = prefix + ".label_proj";
    n.intent_table = prefix + ".intent_table";
    n.slot_table = prefix + ".slot_table";

    ps.create(n.token_table, xavier_uniform(vocab_size, d_emb, vocab_size, d_emb, rng));
    for (const auto* dir : {"fwd", "bwd"}) {
        std::string p = prefix + "." + dir;
        ps.create(p + ".wx", xavier_uniform(d_emb, 4 * h, d_emb, h, rng));
        ps.create(p + ".wh", xavier_uniform(h, 4 * h, h, h, rng));
        ps.create(p + ".b", Matrix(1, 4 * h));
    }
    ps.create(n.proj_w, xavier_uniform(2 * h, d, 2 * h, d, rng));
    ps.create(n.proj_b, Matrix(1, d));
    ps.create(n.label_proj, xavier_uniform(d, d, d, d, rng));
    ps.create(n.intent_table, xavier_uniform(n_intents, d, n_intents, d, rng));
    ps.create(n.slot_table, xavier_uniform(n_slots, d, n_slots, d, rng));
    return n;
}

EmbedderVars bind_embedder(BoundParams& bp, const EmbedderNames& n) {
    EmbedderVars v;
    v.token_table = bp(n.token_table);
    v.fwd_wx = bp(n.fwd_wx);
    v.fwd_wh = bp(n.fwd_wh);
    v.fwd_b = bp(n.fwd_b);
    v.bwd_wx = bp(n.bwd_wx);
    v.bwd_wh = bp(n.bwd_wh);
    v.bwd_b = bp(n.bwd_b);
    v.proj_w = bp(n.proj_w);
    v.proj_b = bp(n.proj_b);
    v.label_proj = bp(n.label_proj);
    v.intent_table = bp(n.intent_table);
    v.slot_table = bp(n.slot_table);
    v.hidden = n.hidden;
    return v;
}

Var embed_tokens(Tape& t, Var token_table, const std::vector<int>& ids) {
    if (ids.empty()) throw ShapeError("embed_tokens: empty token sequence");
    return t.embedding_rows(token_table, ids);
}

namespace {

// One LSTM direction; returns the n hidden-state rows in input order.
std::vector<Var> lstm_direction(Tape& t, Var x, Var wx, Var wh, Var b, int h, bool reverse) {
    int n = t.val(x).rows();
    Var pre = t.add_row_broadcast(t.matmul(x, wx), b);  // n x 4h
    Var hidden = t.leaf(Matrix(1, h));
    Var cell = t.leaf(Matrix(1, h));
    std::vector<Var> out(n);
    for (int step = 0; step < n; ++step) {
        int row = reverse ? n - 1 - step : step;
        Var z = t.add(t.slice_rows(pre, row, row + 1), t.matmul(hidden, wh));
        Var gi = t.activation(t.slice_cols(z, 0, h), Act::Sigmoid);
        Var gf = t.activation(t.slice_cols(z, h, 2 * h), Act::Sigmoid);
        Var gc = t.activation(t.slice_cols(z, 2 * h, 3 * h), Act::Tanh);
        Var go = t.activation(t.slice_cols(z, 3 * h, 4 * h), Act::Sigmoid);
        cell = t.add(t.hadamard(gf, cell), t.hadamard(gi, gc));
        hidden = t.hadamard(go, t.activation(cell, Act::Tanh));
        out[row] = hidden;
    }
    return out;
}

}  // namespace

Var bilstm_states(Tape& t, Var x, const EmbedderVars& v) {
    int h = v.hidden;
    auto fwd = lstm_direction(t, x, v.fwd_wx, v.fwd_wh, v.fwd_b, h, false);
    auto bwd = lstm_direction(t, x, v.bwd_wx, v.bwd_wh, v.bwd_b, h, true);
    std::vector<Var> rows(fwd.size());
    for (size_t i = 0; i < fwd.size(); ++i) rows[i] = t.concat_cols(fwd[i], bwd[i]);
    return t.concat_rows(rows);
}

Var bilstm(Tape& t, Var x, const EmbedderVars& v) {
    Var states = bilstm_states(t, x, v);
    return t.add_row_broadcast(t.matmul(states, v.proj_w), v.proj_b);
}

LabelAttention label_attention(Tape& t, Var h, Var label_table) {
    int d = t.val(h).cols();
    if (t.val(label_table).cols() != d) {
        throw ShapeError("label_attention: table width " + std::to_string(t.val(label_table).cols()) +
                         " != hidden width " + std::to_string(d));
    }
    Var logits = t.scale(t.matmul_nt(h, label_table), 1.0 / std::sqrt(static_cast<double>(d)));
    Var weights = t.softmax_rows(logits);
    return LabelAttention{t.matmul(weights, label_table), weights};
}

EmbedderOutput run_embedder(Tape& t, const EmbedderVars& v, const std::vector<int>& token_ids) {
    Var emb = embed_tokens(t, v.token_table, token_ids);
    Var h = bilstm(t, emb, v);
    Var h_proj = t.matmul(h, v.label_proj);
    LabelAttention intent = label_attention(t, h_proj, v.intent_table);
    LabelAttention slot = label_attention(t, h_proj, v.slot_table);
    return EmbedderOutput{h, intent.output, slot.output, intent.weights, slot.weights};
}

int load_word_vectors(const std::string& path, const Vocab& vocab, Matrix& table) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open word-vector file " + path);
    std::string line;
    int lineno = 0, loaded = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        std::vector<double> vec;
        double x;
        while (ss >> x) vec.push_back(x);
        if (static_cast<int>(vec.size()) != table.cols()) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(table.cols()) +
                             " values, got " + std::to_string(vec.size()));
        }
        if (!vocab.contains(token)) continue;
        int row = vocab.id(token);
        for (int j = 0; j < table.cols(); ++j) table.at(row, j) = vec[j];
        ++loaded;
    }
    check_finite(table, "load_word_vectors");
    return loaded;
}

}  // namespace han
