#include <doctest.h>

#include <cmath>

#include "han/encoder.hpp"
#include "han/errors.hpp"
#include "han/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace han;
using testutil::random_matrix;

namespace {

struct EncFixture {
    ParamStore ps;
    EncoderNames enc;
    FusionNames fus;
    int d;
    EncFixture(int d_, int n_layers, uint64_t seed = 1) : d(d_) {
        Rng rng(seed);
        enc = init_encoder_params(ps, "encoder", n_layers, d, rng);
        fus = init_fusion_params(ps, "fusion", d, 2 * d, rng);
    }

    std::vector<LayerVars> bind_layers(BoundParams& bp, Act act) {
        std::vector<LayerVars> out;
        for (const auto& l : enc.layers) out.push_back(bind_layer(bp, l, act, false));
        return out;
    }

    void zero(const std::string& name) {
        for (auto& v : ps.value(name).values()) v = 0.0;
    }
};

// x * W^T, applying the weight to each row as a column vector.
Matrix project(const Matrix& x, const Matrix& w) {
    Matrix out(x.rows(), w.rows());
    for (int i = 0; i < x.rows(); ++i) {
        auto y = oracle::linear(w, oracle::row_of(x, i));
        for (int j = 0; j < w.rows(); ++j) out.at(i, j) = y[j];
    }
    return out;
}

// x * W for a (in x out)-shaped weight, one row at a time.
std::vector<double> apply_in_out(const Matrix& w, const std::vector<double>& x) {
    std::vector<double> out(w.cols(), 0.0);
    for (int j = 0; j < w.cols(); ++j) {
        double s = 0.0;
        for (size_t k = 0; k < x.size(); ++k) s += x[k] * w.at(static_cast<int>(k), j);
        out[j] = s;
    }
    return out;
}

}  // namespace

TEST_CASE("encoder layer: zeroed value projections leave LN(H)") {
    EncFixture f(4, 1, 3);
    f.zero("encoder.l0.intent.w_v");
    f.zero("encoder.l0.slot.w_v");
    // gates multiply a zero mix, so this holds for relu pooling
    Rng rng(5);
    Matrix hi = random_matrix(3, 4, rng), hs = random_matrix(3, 4, rng);
    Tape t;
    BoundParams bp(t, f.ps);
    LayerVars lv = bind_layer(bp, f.enc.layers[0], Act::Relu, false);
    LayerOutput out = encoder_layer(t, t.leaf(hi), t.leaf(hs), lv);

    Var gain = t.leaf(f.ps.value("encoder.l0.intent.ln_gain"));
    Var bias = t.leaf(f.ps.value("encoder.l0.intent.ln_bias"));
    const Matrix& want = t.val(t.layer_norm(t.leaf(hi), gain, bias));
    CHECK(max_abs_diff(t.val(out.h_intent), want) < 1e-12);
}

TEST_CASE("encoder layer: n=1, d=2 straight-line oracle") {
    EncFixture f(2, 1, 7);
    Rng rng(8);
    Matrix hi = random_matrix(1, 2, rng), hs = random_matrix(1, 2, rng);
    Tape t;
    BoundParams bp(t, f.ps);
    LayerVars lv = bind_layer(bp, f.enc.layers[0], Act::Elu, false);
    LayerOutput got = encoder_layer(t, t.leaf(hi), t.leaf(hs), lv);

    auto stream_oracle = [&](const Matrix& h_mine, const Matrix& h_other, const std::string& prefix) {
        Matrix q = project(h_mine, f.ps.value(prefix + ".w_q"));
        std::string other = prefix.find("intent") != std::string::npos
                                ? "encoder.l0.slot"
                                : "encoder.l0.intent";
        Matrix k = project(h_other, f.ps.value(other + ".w_k"));
        Matrix v = project(h_other, f.ps.value(other + ".w_v"));
        oracle::BlockWeights w{f.ps.value(prefix + ".block.w_k"),   f.ps.value(prefix + ".block.w_q_k"),
                               f.ps.value(prefix + ".block.w_b_k"), f.ps.value(prefix + ".block.w_b"),
                               f.ps.value(prefix + ".block.w_e"),   f.ps.value(prefix + ".block.w_v"),
                               f.ps.value(prefix + ".block.w_q_v")};
        Matrix attended = oracle::f_bilinear(k, v, q, w, "elu");
        std::vector<double> residual(2);
        for (int j = 0; j < 2; ++j) residual[j] = h_mine.at(0, j) + attended.at(0, j);
        return oracle::layer_norm_row(residual, oracle::row_of(f.ps.value(prefix + ".ln_gain"), 0),
                                      oracle::row_of(f.ps.value(prefix + ".ln_bias"), 0));
    };
    auto want_i = stream_oracle(hi, hs, "encoder.l0.intent");
    auto want_s = stream_oracle(hs, hi, "encoder.l0.slot");
    for (int j = 0; j < 2; ++j) {
        CHECK(t.val(got.h_intent).at(0, j) == doctest::Approx(want_i[j]).epsilon(1e-12));
        CHECK(t.val(got.h_slot).at(0, j) == doctest::Approx(want_s[j]).epsilon(1e-12));
    }
}

TEST_CASE("encoder layer: identical streams and tied params stay identical") {
    EncFixture f(3, 1, 9);
    // tie the slot stream to the intent stream
    for (const auto& suffix : {".w_q", ".w_k", ".w_v", ".ln_gain", ".ln_bias", ".block.w_k", ".block.w_q_k",
                               ".block.w_b_k", ".block.w_b", ".block.w_e", ".block.w_v", ".block.w_q_v"}) {
        f.ps.value(std::string("encoder.l0.slot") + suffix) =
            f.ps.value(std::string("encoder.l0.intent") + suffix);
    }
    Rng rng(10);
    Matrix h = random_matrix(3, 3, rng);
    Tape t;
    BoundParams bp(t, f.ps);
    LayerVars lv = bind_layer(bp, f.enc.layers[0], Act::Elu, false);
    LayerOutput out = encoder_layer(t, t.leaf(h), t.leaf(h), lv);
    CHECK(max_abs_diff(t.val(out.h_intent), t.val(out.h_slot)) == 0.0);
}

TEST_CASE("run_encoder composes layers referentially") {
    EncFixture f(3, 2, 11);
    Rng rng(12);
    Matrix hi = random_matrix(2, 3, rng), hs = random_matrix(2, 3, rng);

    Tape t;
    BoundParams bp(t, f.ps);
    auto layers = f.bind_layers(bp, Act::Elu);
    EncoderOutput full = run_encoder(t, t.leaf(hi), t.leaf(hs), layers);

    LayerOutput first = encoder_layer(t, t.leaf(hi), t.leaf(hs), layers[0]);
    LayerOutput second = encoder_layer(t, first.h_intent, first.h_slot, layers[1]);
    CHECK(max_abs_diff(t.val(full.h_intent), t.val(second.h_intent)) == 0.0);
    CHECK(max_abs_diff(t.val(full.h_slot), t.val(second.h_slot)) == 0.0);
    CHECK(max_abs_diff(t.val(full.q_intent), t.val(second.q_intent)) == 0.0);

    // single layer: run_encoder is exactly one encoder_layer call
    EncFixture f1(3, 1, 13);
    Tape t1;
    BoundParams bp1(t1, f1.ps);
    auto layers1 = f1.bind_layers(bp1, Act::Elu);
    EncoderOutput once = run_encoder(t1, t1.leaf(hi), t1.leaf(hs), layers1);
    LayerOutput direct = encoder_layer(t1, t1.leaf(hi), t1.leaf(hs), layers1[0]);
    CHECK(max_abs_diff(t1.val(once.h_intent), t1.val(direct.h_intent)) == 0.0);
}

TEST_CASE("run_encoder outputs stay finite across seeds (fuzz)") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        EncFixture f(3, 2, seed);
        Rng rng(seed + 1000);
        int n = 1 + static_cast<int>(seed % 4);
        Tape t;
        BoundParams bp(t, f.ps);
        auto layers = f.bind_layers(bp, seed % 2 == 0 ? Act::Elu : Act::Relu);
        EncoderOutput out = run_encoder(t, t.leaf(random_matrix(n, 3, rng)), t.leaf(random_matrix(n, 3, rng)),
                                        layers);
        CHECK(t.val(out.h_intent).all_finite());
        CHECK(t.val(out.h_slot).all_finite());
        CHECK(t.val(out.h_intent).rows() == n);
        CHECK(t.val(out.h_slot).cols() == 3);
    }
}

TEST_CASE("dynamic fuse: zero gates and zero FFN degenerate paths") {
    EncFixture f(3, 1, 14);
    Rng rng(15);
    Matrix qi = random_matrix(2, 3, rng), hi = random_matrix(2, 3, rng);
    Matrix qs = random_matrix(2, 3, rng), hs = random_matrix(2, 3, rng);

    // zero gate weights: every alpha is exactly 0.5 and the fused features
    // average the two streams
    EncFixture fz(3, 1, 14);
    fz.zero("fusion.w_intent");
    fz.zero("fusion.w_slot");
    Tape t;
    BoundParams bp(t, fz.ps);
    FusionVars fv = bind_fusion(bp, fz.fus);
    FusionOutput out = dynamic_fuse(t, t.leaf(qi), t.leaf(hi), t.leaf(qs), t.leaf(hs), fv);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(t.val(out.alpha_intent).at(i, j) == 0.5);
            CHECK(t.val(out.fused).at(i, j) == doctest::Approx(0.5 * (hi.at(i, j) + hs.at(i, j))).epsilon(1e-12));
        }
    }

    // zero FFN: the update reduces to LN of the residual stream
    EncFixture fz2(3, 1, 14);
    fz2.zero("fusion.ffn_w1");
    fz2.zero("fusion.ffn_w2");
    Tape t2;
    BoundParams bp2(t2, fz2.ps);
    FusionVars fv2 = bind_fusion(bp2, fz2.fus);
    FusionOutput out2 = dynamic_fuse(t2, t2.leaf(qi), t2.leaf(hi), t2.leaf(qs), t2.leaf(hs), fv2);
    Var gain = t2.leaf(fz2.ps.value("fusion.ln_intent_gain"));
    Var bias = t2.leaf(fz2.ps.value("fusion.ln_intent_bias"));
    CHECK(max_abs_diff(t2.val(out2.h_intent), t2.val(t2.layer_norm(t2.leaf(hi), gain, bias))) < 1e-12);
}

TEST_CASE("dynamic fuse matches the straight-line oracle") {
    EncFixture f(2, 1, 16);
    Rng rng(17);
    Matrix qi = random_matrix(2, 2, rng), hi = random_matrix(2, 2, rng);
    Matrix qs = random_matrix(2, 2, rng), hs = random_matrix(2, 2, rng);
    Tape t;
    BoundParams bp(t, f.ps);
    FusionVars fv = bind_fusion(bp, f.fus);
    FusionOutput got = dynamic_fuse(t, t.leaf(qi), t.leaf(hi), t.leaf(qs), t.leaf(hs), fv);

    for (int i = 0; i < 2; ++i) {
        std::vector<double> cat_i{qi.at(i, 0), qi.at(i, 1), hi.at(i, 0), hi.at(i, 1)};
        std::vector<double> cat_s{qs.at(i, 0), qs.at(i, 1), hs.at(i, 0), hs.at(i, 1)};
        auto ai = apply_in_out(f.ps.value("fusion.w_intent"), cat_i);
        auto as = apply_in_out(f.ps.value("fusion.w_slot"), cat_s);
        std::vector<double> fused(2);
        for (int j = 0; j < 2; ++j) {
            ai[j] = oracle::sigmoid(ai[j] + f.ps.value("fusion.b_intent").at(0, j));
            as[j] = oracle::sigmoid(as[j] + f.ps.value("fusion.b_slot").at(0, j));
            fused[j] = ai[j] * hi.at(i, j) + as[j] * hs.at(i, j);
        }
        auto inner = apply_in_out(f.ps.value("fusion.ffn_w1"), fused);
        for (size_t k = 0; k < inner.size(); ++k) {
            inner[k] = std::max(0.0, inner[k] + f.ps.value("fusion.ffn_b1").at(0, static_cast<int>(k)));
        }
        auto ffn = apply_in_out(f.ps.value("fusion.ffn_w2"), inner);
        std::vector<double> res_i(2), res_s(2);
        for (int j = 0; j < 2; ++j) {
            ffn[j] += f.ps.value("fusion.ffn_b2").at(0, j);
            res_i[j] = ffn[j] + hi.at(i, j);
            res_s[j] = ffn[j] + hs.at(i, j);
        }
        auto want_i = oracle::layer_norm_row(res_i, oracle::row_of(f.ps.value("fusion.ln_intent_gain"), 0),
                                             oracle::row_of(f.ps.value("fusion.ln_intent_bias"), 0));
        auto want_s = oracle::layer_norm_row(res_s, oracle::row_of(f.ps.value("fusion.ln_slot_gain"), 0),
                                             oracle::row_of(f.ps.value("fusion.ln_slot_bias"), 0));
        for (int j = 0; j < 2; ++j) {
            CHECK(t.val(got.h_intent).at(i, j) == doctest::Approx(want_i[j]).epsilon(1e-12));
            CHECK(t.val(got.h_slot).at(i, j) == doctest::Approx(want_s[j]).epsilon(1e-12));
            CHECK(t.val(got.alpha_intent).at(i, j) == doctest::Approx(ai[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("fusion gates lie strictly inside (0,1)") {
    Rng rng(18);
    for (int it = 0; it < 20; ++it) {
        EncFixture f(3, 1, 200 + it);
        int n = rng.uniform_int(1, 5);
        Tape t;
        BoundParams bp(t, f.ps);
        FusionVars fv = bind_fusion(bp, f.fus);
        FusionOutput out = dynamic_fuse(t, t.leaf(random_matrix(n, 3, rng)), t.leaf(random_matrix(n, 3, rng)),
                                        t.leaf(random_matrix(n, 3, rng)), t.leaf(random_matrix(n, 3, rng)), fv);
        for (Var alpha : {out.alpha_intent, out.alpha_slot}) {
            for (double v : t.val(alpha).values()) {
                CHECK(v > 0.0);
                CHECK(v < 1.0);
            }
        }
    }
}

TEST_CASE("degenerate path: zeroed block value sides give iterated LN") {
    EncFixture f(4, 2, 19);
    for (int l = 0; l < 2; ++l) {
        for (const auto* stream : {"intent", "slot"}) {
            f.zero("encoder.l" + std::to_string(l) + "." + stream + ".block.w_v");
        }
    }
    Rng rng(20);
    Matrix hi = random_matrix(3, 4, rng);
    Matrix hs = random_matrix(3, 4, rng);
    Tape t;
    BoundParams bp(t, f.ps);
    auto layers = f.bind_layers(bp, Act::Relu);
    EncoderOutput out = run_encoder(t, t.leaf(hi), t.leaf(hs), layers);

    Var iter = t.leaf(hi);
    for (int l = 0; l < 2; ++l) {
        std::string p = "encoder.l" + std::to_string(l) + ".intent";
        iter = t.layer_norm(iter, t.leaf(f.ps.value(p + ".ln_gain")), t.leaf(f.ps.value(p + ".ln_bias")));
    }
    CHECK(max_abs_diff(t.val(out.h_intent), t.val(iter)) < 1e-12);
}

TEST_CASE("end-to-end gradient check: encoder plus fusion") {
    EncFixture f(4, 2, 23);
    Rng rng(24);
    Matrix hi = random_matrix(3, 4, rng), hs = random_matrix(3, 4, rng);
    auto run = [&](Tape& t, BoundParams& bp) {
        auto layers = f.bind_layers(bp, Act::Elu);
        FusionVars fv = bind_fusion(bp, f.fus);
        EncoderOutput enc = run_encoder(t, t.leaf(hi), t.leaf(hs), layers);
        FusionOutput fus = dynamic_fuse(t, enc.q_intent, enc.h_intent, enc.q_slot, enc.h_slot, fv);
        return t.sum_all(t.hadamard(fus.h_intent, fus.h_slot));
    };
    auto loss_value = [&]() {
        Tape t(false);
        BoundParams bp(t, f.ps);
        return t.val(run(t, bp)).at(0, 0);
    };
    auto compute = [&]() {
        Tape t;
        BoundParams bp(t, f.ps);
        t.backward(run(t, bp));
        bp.flush_grads();
    };
    CHECK(testutil::max_param_grad_err(f.ps, loss_value, compute) < 1e-3);
}
