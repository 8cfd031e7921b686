#include "han/bilinear_block.hpp"

#include "han/errors.hpp"
#include "han/rng.hpp"

namespace han {

BlockNames init_block_params(ParamStore& ps, const std::string& prefix, int d, Rng& rng) {
    BlockNames n;
    n.w_k = prefix + ".w_k";
    n.w_q_k = prefix + ".w_q_k";
    n.w_b_k = prefix + ".w_b_k";
    n.w_b = prefix + ".w_b";
    n.w_e = prefix + ".w_e";
    n.w_v = prefix + ".w_v";
    n.w_q_v = prefix + ".w_q_v";
    for (const auto* name : {&n.w_k, &n.w_q_k, &n.w_b_k, &n.w_e, &n.w_v, &n.w_q_v}) {
        ps.create(*name, xavier_uniform(d, d, d, d, rng));
    }
    ps.create(n.w_b, xavier_uniform(1, d, d, 1, rng));
    return n;
}

BlockVars bind_block(BoundParams& bp, const BlockNames& n, Act act, bool shared_channel_gate) {
    BlockVars v;
    v.w_k = bp(n.w_k);
    v.w_q_k = bp(n.w_q_k);
    v.w_b_k = bp(n.w_b_k);
    v.w_b = bp(n.w_b);
    v.w_e = bp(n.w_e);
    v.w_v = bp(n.w_v);
    v.w_q_v = bp(n.w_q_v);
    v.act = act;
    v.shared_channel_gate = shared_channel_gate;
    return v;
}

Var bilinear_pool(Tape& t, Var a, Var b, Var wa, Var wb, Act act) {
    return t.hadamard(t.activation(t.matmul_nt(a, wa), act), t.activation(t.matmul_nt(b, wb), act));
}

namespace {

// Pooled query-key maps for one query against all keys: rows are
// act(k_i W_k^T) ⊙ act(q W_q^T).
Var pooled_rows(Tape& t, Var q, Var rows, Var w_rows, Var w_q, Act act) {
    int n = t.val(rows).rows();
    Var row_side = t.activation(t.matmul_nt(rows, w_rows), act);
    Var q_side = t.broadcast_rows(t.activation(t.matmul_nt(q, w_q), act), n);
    return t.hadamard(row_side, q_side);
}

}  // namespace

ContextualAttention contextual_attention(Tape& t, Var q, Var keys, const BlockVars& v) {
    Var pooled = pooled_rows(t, q, keys, v.w_k, v.w_q_k, v.act);
    Var transformed = t.activation(t.matmul_nt(pooled, v.w_b_k), Act::Relu);
    Var scores = t.transpose(t.matmul_nt(transformed, v.w_b));  // 1 x n
    return ContextualAttention{t.softmax_rows(scores), transformed, pooled};
}

Var channel_attention(Tape& t, Var transformed_qk, Var w_e) {
    return t.activation(t.matmul_nt(t.mean_rows(transformed_qk), w_e), Act::Sigmoid);
}

AttendResult attend(Tape& t, Var q, Var keys, Var values, const BlockVars& v) {
    if (t.val(keys).rows() != t.val(values).rows()) {
        throw ShapeError("attend: keys have " + std::to_string(t.val(keys).rows()) + " rows but values have " +
                         std::to_string(t.val(values).rows()));
    }
    ContextualAttention ctx = contextual_attention(t, q, keys, v);
    Var gate = channel_attention(t, ctx.transformed_qk, v.w_e);
    Var pooled_values = pooled_rows(t, q, values, v.w_v, v.w_q_v, v.act);
    Var mixed = t.matmul(ctx.weights, pooled_values);  // 1 x d
    return AttendResult{t.hadamard(gate, mixed), ctx.weights, gate, ctx.bilinear_qk, ctx.transformed_qk};
}

BlockOutput f_bilinear(Tape& t, Var keys, Var values, Var queries, const BlockVars& v, bool want_trace) {
    if (t.val(keys).rows() != t.val(values).rows()) {
        throw ShapeError("f_bilinear: keys/values row mismatch " + t.val(keys).shape_str() + " vs " +
                         t.val(values).shape_str());
    }
    int n_q = t.val(queries).rows();
    int n_kv = t.val(keys).rows();
    int d = t.val(queries).cols();

    Var shared_gate;
    if (v.shared_channel_gate) {
        // One squeeze over the transformed maps of every query.
        std::vector<Var> all;
        all.reserve(n_q);
        for (int i = 0; i < n_q; ++i) {
            Var q = t.slice_rows(queries, i, i + 1);
            all.push_back(contextual_attention(t, q, keys, v).transformed_qk);
        }
        shared_gate = channel_attention(t, t.concat_rows(all), v.w_e);
    }

    BlockOutput out;
    if (want_trace) {
        out.trace.beta_s = Matrix(n_q, n_kv);
        out.trace.beta_c = Matrix(n_q, d);
    }
    std::vector<Var> rows(n_q);
    for (int i = 0; i < n_q; ++i) {
        Var q = t.slice_rows(queries, i, i + 1);
        AttendResult r;
        if (v.shared_channel_gate) {
            ContextualAttention ctx = contextual_attention(t, q, keys, v);
            Var pooled_values = pooled_rows(t, q, values, v.w_v, v.w_q_v, v.act);
            Var mixed = t.matmul(ctx.weights, pooled_values);
            r = AttendResult{t.hadamard(shared_gate, mixed), ctx.weights, shared_gate, ctx.bilinear_qk,
                             ctx.transformed_qk};
        } else {
            r = attend(t, q, keys, values, v);
        }
        rows[i] = r.v_hat;
        if (want_trace) {
            const Matrix& bs = t.val(r.beta_s);
            const Matrix& bc = t.val(r.beta_c);
            for (int j = 0; j < n_kv; ++j) out.trace.beta_s.at(i, j) = bs.at(0, j);
            for (int j = 0; j < d; ++j) out.trace.beta_c.at(i, j) = bc.at(0, j);
            out.trace.bilinear_qk.push_back(t.val(r.bilinear_qk));
            out.trace.transformed_qk.push_back(t.val(r.transformed_qk));
        }
    }
    out.v_hat = t.concat_rows(rows);
    return out;
}

}  // namespace han
