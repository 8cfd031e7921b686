#include <doctest.h>

#include <cmath>

#include "han/bilinear_block.hpp"
#include "han/errors.hpp"
#include "han/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace han;
using testutil::random_matrix;

namespace {

struct BlockFixture {
    ParamStore ps;
    BlockNames names;
    explicit BlockFixture(int d, uint64_t seed = 1) {
        Rng rng(seed);
        names = init_block_params(ps, "block", d, rng);
    }

    BlockVars bind(Tape& t, Act act, bool shared = false) {
        BlockVars v;
        v.w_k = t.leaf(ps.value(names.w_k));
        v.w_q_k = t.leaf(ps.value(names.w_q_k));
        v.w_b_k = t.leaf(ps.value(names.w_b_k));
        v.w_b = t.leaf(ps.value(names.w_b));
        v.w_e = t.leaf(ps.value(names.w_e));
        v.w_v = t.leaf(ps.value(names.w_v));
        v.w_q_v = t.leaf(ps.value(names.w_q_v));
        v.act = act;
        v.shared_channel_gate = shared;
        return v;
    }

    oracle::BlockWeights oracle_weights() const {
        return oracle::BlockWeights{ps.value(names.w_k), ps.value(names.w_q_k), ps.value(names.w_b_k),
                                    ps.value(names.w_b), ps.value(names.w_e),   ps.value(names.w_v),
                                    ps.value(names.w_q_v)};
    }
};

}  // namespace

TEST_CASE("bilinear pool: identity weights and the exp base case") {
    Tape t;
    Var eye = t.leaf(Matrix::identity(2));
    Var a = t.leaf(Matrix{{1.0, 2.0}});
    Var b = t.leaf(Matrix{{3.0, 0.0}});
    CHECK(t.val(bilinear_pool(t, a, b, eye, eye, Act::Relu)) == Matrix{{3.0, 0.0}});

    Var zero = t.leaf(Matrix(1, 2));
    CHECK(t.val(bilinear_pool(t, zero, zero, eye, eye, Act::Exp)) == Matrix{{1.0, 1.0}});
}

TEST_CASE("exp pooling satisfies the exponential product identity") {
    Rng rng(101);
    for (int it = 0; it < 200; ++it) {
        int d = rng.uniform_int(2, 6);
        Matrix wa = random_matrix(d, d, rng, -0.5, 0.5), wb = random_matrix(d, d, rng, -0.5, 0.5);
        Matrix a = random_matrix(1, d, rng), b = random_matrix(1, d, rng);
        Tape t;
        const Matrix& pooled =
            t.val(bilinear_pool(t, t.leaf(a), t.leaf(b), t.leaf(wa), t.leaf(wb), Act::Exp));
        // exp(Wa a) ⊙ exp(Wb b) = exp(Wa a + Wb b), element by element
        auto left = oracle::linear(wa, oracle::row_of(a, 0));
        auto right = oracle::linear(wb, oracle::row_of(b, 0));
        for (int j = 0; j < d; ++j) {
            CHECK(std::abs(pooled.at(0, j) - std::exp(left[j] + right[j])) < 1e-12);
        }
    }
}

TEST_CASE("contextual attention: singleton, uniform, and oracle cases") {
    BlockFixture f(3);
    Tape t;
    BlockVars v = f.bind(t, Act::Elu);
    Rng rng(7);

    Var q = t.leaf(random_matrix(1, 3, rng));
    ContextualAttention single = contextual_attention(t, q, t.leaf(random_matrix(1, 3, rng)), v);
    CHECK(t.val(single.weights) == Matrix{{1.0}});

    // identical keys: equal logits, uniform weights
    Matrix krow = random_matrix(1, 3, rng);
    Matrix keys(4, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) keys.at(i, j) = krow.at(0, j);
    ContextualAttention uni = contextual_attention(t, q, t.leaf(keys), v);
    for (int i = 0; i < 4; ++i) CHECK(t.val(uni.weights).at(0, i) == doctest::Approx(0.25).epsilon(1e-12));

    // n=3 random: matches the straight-line recomputation
    Matrix k3 = random_matrix(3, 3, rng);
    ContextualAttention got = contextual_attention(t, q, t.leaf(k3), v);
    auto want = oracle::attend(oracle::row_of(t.val(q), 0), k3, k3, f.oracle_weights(), "elu");
    for (int i = 0; i < 3; ++i) CHECK(t.val(got.weights).at(0, i) == doctest::Approx(want.beta_s[i]).epsilon(1e-12));
}

TEST_CASE("channel attention: squeeze mean, zero gate, oracle case") {
    BlockFixture f(3);
    Rng rng(8);
    Tape t;
    BlockVars v = f.bind(t, Act::Relu);

    // identical rows: the squeeze reproduces the row
    Matrix row = random_matrix(1, 3, rng);
    Matrix rep(5, 3);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) rep.at(i, j) = row.at(0, j);
    Var reps = t.leaf(rep);
    const Matrix& mean = t.val(t.mean_rows(reps));
    for (int j = 0; j < 3; ++j) CHECK(mean.at(0, j) == doctest::Approx(row.at(0, j)).epsilon(1e-12));

    // zero excitation weights: every gate is exactly sigmoid(0)
    Var w0 = t.leaf(Matrix(3, 3));
    const Matrix& gate0 = t.val(channel_attention(t, reps, w0));
    for (int j = 0; j < 3; ++j) CHECK(gate0.at(0, j) == 0.5);

    // n=2, d=3 random case
    Matrix b_prime = random_matrix(2, 3, rng);
    const Matrix& gate = t.val(channel_attention(t, t.leaf(b_prime), t.leaf(f.ps.value(f.names.w_e))));
    std::vector<double> squeezed(3, 0.0);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) squeezed[j] += b_prime.at(i, j) / 2.0;
    auto excited = oracle::linear(f.ps.value(f.names.w_e), squeezed);
    for (int j = 0; j < 3; ++j) CHECK(gate.at(0, j) == doctest::Approx(oracle::sigmoid(excited[j])).epsilon(1e-12));
}

TEST_CASE("attend: single pair, zero values, oracle case") {
    BlockFixture f(4);
    Rng rng(9);
    Tape t;
    BlockVars v = f.bind(t, Act::Elu);

    Matrix q = random_matrix(1, 4, rng), k1 = random_matrix(1, 4, rng), v1 = random_matrix(1, 4, rng);
    AttendResult one = attend(t, t.leaf(q), t.leaf(k1), t.leaf(v1), v);
    // with a single weight of 1, v_hat = beta_c ⊙ B_1^v
    const Matrix& pooled = t.val(bilinear_pool(t, t.leaf(v1), t.leaf(q), v.w_v, v.w_q_v, Act::Elu));
    for (int j = 0; j < 4; ++j) {
        CHECK(t.val(one.v_hat).at(0, j) ==
              doctest::Approx(t.val(one.beta_c).at(0, j) * pooled.at(0, j)).epsilon(1e-12));
    }

    // all-zero values under relu produce a zero update
    BlockVars vr = f.bind(t, Act::Relu);
    AttendResult zero = attend(t, t.leaf(q), t.leaf(random_matrix(3, 4, rng)), t.leaf(Matrix(3, 4)), vr);
    CHECK(t.val(zero.v_hat) == Matrix(1, 4));

    // n=3 random case against the full oracle formula chain
    Matrix keys = random_matrix(3, 4, rng), values = random_matrix(3, 4, rng);
    AttendResult got = attend(t, t.leaf(q), t.leaf(keys), t.leaf(values), v);
    auto want = oracle::attend(oracle::row_of(q, 0), keys, values, f.oracle_weights(), "elu");
    for (int j = 0; j < 4; ++j) {
        CHECK(t.val(got.v_hat).at(0, j) == doctest::Approx(want.v_hat[j]).epsilon(1e-12));
        CHECK(t.val(got.beta_c).at(0, j) == doctest::Approx(want.beta_c[j]).epsilon(1e-12));
    }
}

TEST_CASE("f_bilinear: identity row, permutation invariance, oracle") {
    BlockFixture f(4);
    Rng rng(10);

    // Q=K=V with a single row equals attend on that row
    Matrix xq = random_matrix(1, 4, rng);
    Tape t;
    BlockVars v = f.bind(t, Act::Elu);
    BlockOutput single = f_bilinear(t, t.leaf(xq), t.leaf(xq), t.leaf(xq), v, true);
    AttendResult direct = attend(t, t.leaf(xq), t.leaf(xq), t.leaf(xq), v);
    CHECK(max_abs_diff(t.val(single.v_hat), t.val(direct.v_hat)) == 0.0);
    CHECK(single.trace.beta_s == Matrix{{1.0}});

    // 3x4 random case vs the oracle, max abs diff below 1e-12
    Matrix keys = random_matrix(3, 4, rng), values = random_matrix(3, 4, rng), queries = random_matrix(3, 4, rng);
    Tape t2;
    BlockVars v2 = f.bind(t2, Act::Elu);
    BlockOutput got = f_bilinear(t2, t2.leaf(keys), t2.leaf(values), t2.leaf(queries), v2);
    Matrix want = oracle::f_bilinear(keys, values, queries, f.oracle_weights(), "elu");
    CHECK(max_abs_diff(t2.val(got.v_hat), want) < 1e-12);

    // jointly permuting key/value rows changes nothing
    Matrix pk(3, 4), pv(3, 4);
    int perm[3] = {2, 0, 1};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 4; ++j) {
            pk.at(i, j) = keys.at(perm[i], j);
            pv.at(i, j) = values.at(perm[i], j);
        }
    }
    Tape t3;
    BlockVars v3 = f.bind(t3, Act::Elu);
    BlockOutput permuted = f_bilinear(t3, t3.leaf(pk), t3.leaf(pv), t3.leaf(queries), v3);
    CHECK(max_abs_diff(t3.val(permuted.v_hat), t2.val(got.v_hat)) < 1e-12);
}

TEST_CASE("f_bilinear: attention weights normalized, gates in (0,1)") {
    Rng rng(11);
    for (int it = 0; it < 30; ++it) {
        int d = rng.uniform_int(2, 5);
        BlockFixture f(d, 100 + it);
        int n_kv = rng.uniform_int(1, 5), n_q = rng.uniform_int(1, 5);
        Act act = it % 2 == 0 ? Act::Elu : Act::Relu;
        Tape t;
        BlockVars v = f.bind(t, act);
        BlockOutput out = f_bilinear(t, t.leaf(random_matrix(n_kv, d, rng)), t.leaf(random_matrix(n_kv, d, rng)),
                                     t.leaf(random_matrix(n_q, d, rng)), v, true);
        CHECK(t.val(out.v_hat).rows() == n_q);
        CHECK(t.val(out.v_hat).cols() == d);
        for (int i = 0; i < n_q; ++i) {
            double sum = 0.0;
            for (int j = 0; j < n_kv; ++j) sum += out.trace.beta_s.at(i, j);
            CHECK(std::abs(sum - 1.0) < 1e-9);
            for (int j = 0; j < d; ++j) {
                CHECK(out.trace.beta_c.at(i, j) > 0.0);
                CHECK(out.trace.beta_c.at(i, j) < 1.0);
            }
        }
        CHECK(static_cast<int>(out.trace.bilinear_qk.size()) == n_q);
        CHECK(out.trace.bilinear_qk[0].rows() == n_kv);
    }
}

TEST_CASE("full-block gradient check across all seven weight matrices") {
    BlockFixture f(4, /*seed=*/12);
    Rng rng(13);
    Matrix keys = random_matrix(3, 4, rng), values = random_matrix(3, 4, rng), queries = random_matrix(3, 4, rng);
    std::vector<Matrix> inputs{f.ps.value(f.names.w_k), f.ps.value(f.names.w_q_k), f.ps.value(f.names.w_b_k),
                               f.ps.value(f.names.w_b), f.ps.value(f.names.w_e),   f.ps.value(f.names.w_v),
                               f.ps.value(f.names.w_q_v)};
    double err = testutil::max_grad_err(inputs, [&](Tape& t, const std::vector<Var>& in) {
        BlockVars v{in[0], in[1], in[2], in[3], in[4], in[5], in[6], Act::Elu, false};
        return t.sum_all(f_bilinear(t, t.leaf(keys), t.leaf(values), t.leaf(queries), v).v_hat);
    });
    CHECK(err < 1e-3);
}

TEST_CASE("shared channel gate applies one gate to every query") {
    BlockFixture f(4, 21);
    Rng rng(22);
    Matrix keys = random_matrix(3, 4, rng), values = random_matrix(3, 4, rng), queries = random_matrix(3, 4, rng);
    Tape t;
    BlockVars v = f.bind(t, Act::Elu, /*shared=*/true);
    BlockOutput out = f_bilinear(t, t.leaf(keys), t.leaf(values), t.leaf(queries), v, true);
    for (int i = 1; i < 3; ++i) {
        for (int j = 0; j < 4; ++j) {
            CHECK(out.trace.beta_c.at(i, j) == out.trace.beta_c.at(0, j));
        }
    }
    Tape t2;
    BlockVars v2 = f.bind(t2, Act::Elu, /*shared=*/false);
    BlockOutput per_query = f_bilinear(t2, t2.leaf(keys), t2.leaf(values), t2.leaf(queries), v2, true);
    CHECK(max_abs_diff(per_query.trace.beta_c, out.trace.beta_c) > 1e-8);
}

TEST_CASE("f_bilinear rejects mismatched key/value rows") {
    BlockFixture f(3);
    Tape t;
    BlockVars v = f.bind(t, Act::Relu);
    Rng rng(14);
    CHECK_THROWS_AS(
        f_bilinear(t, t.leaf(random_matrix(2, 3, rng)), t.leaf(random_matrix(3, 3, rng)),
                   t.leaf(random_matrix(2, 3, rng)), v),
        ShapeError);
}
