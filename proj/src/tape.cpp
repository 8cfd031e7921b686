#include "han/tape.hpp"

#include <algorithm>
#include <cmath>

#include "han/errors.hpp"

namespace han {

Act act_from_string(const std::string& s) {
    if (s == "relu") return Act::Relu;
    if (s == "elu") return Act::Elu;
    if (s == "exp") return Act::Exp;
    if (s == "sigmoid") return Act::Sigmoid;
    if (s == "tanh") return Act::Tanh;
    throw ConfigError("unknown activation kind: " + s);
}

std::string act_to_string(Act a) {
    switch (a) {
        case Act::Relu: return "relu";
        case Act::Elu: return "elu";
        case Act::Exp: return "exp";
        case Act::Sigmoid: return "sigmoid";
        case Act::Tanh: return "tanh";
    }
    return "?";
}

Var Tape::push(Matrix value, std::function<void()> back, const char* opname) {
    check_finite(value, opname);
    Node node;
    node.value = std::move(value);
    if (record_) node.back = std::move(back);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix value) {
    return push(std::move(value), nullptr, "leaf");
}

Var Tape::add(Var a, Var b) {
    check_same_shape(val(a), val(b), "add");
    Matrix out = val(a);
    const Matrix& bv = val(b);
    for (size_t i = 0; i < out.values().size(); ++i) out.values()[i] += bv.values()[i];
    return push(std::move(out), [this, a, b, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        Matrix& ga = grad_mut(a);
        Matrix& gb = grad_mut(b);
        for (size_t i = 0; i < g.values().size(); ++i) {
            ga.values()[i] += g.values()[i];
            gb.values()[i] += g.values()[i];
        }
    }, "add");
}

Var Tape::scale(Var x, double c) {
    Matrix out = val(x);
    for (auto& v : out.values()) v *= c;
    return push(std::move(out), [this, x, c, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        Matrix& gx = grad_mut(x);
        for (size_t i = 0; i < g.values().size(); ++i) gx.values()[i] += c * g.values()[i];
    }, "scale");
}

Var Tape::hadamard(Var a, Var b) {
    check_same_shape(val(a), val(b), "hadamard");
    Matrix out = val(a);
    const Matrix& bv = val(b);
    for (size_t i = 0; i < out.values().size(); ++i) out.values()[i] *= bv.values()[i];
    return push(std::move(out), [this, a, b, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        const Matrix& av = nodes_[a.id].value;
        const Matrix& bv2 = nodes_[b.id].value;
        Matrix& ga = grad_mut(a);
        Matrix& gb = grad_mut(b);
        for (size_t i = 0; i < g.values().size(); ++i) {
            ga.values()[i] += g.values()[i] * bv2.values()[i];
            gb.values()[i] += g.values()[i] * av.values()[i];
        }
    }, "hadamard");
}

namespace {

Matrix matmul_plain(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            double aik = a.at(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.data() + static_cast<size_t>(k) * b.cols();
            double* orow = out.data() + static_cast<size_t>(i) * out.cols();
            for (int j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

// a * b^T
Matrix matmul_nt_plain(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.rows());
    for (int i = 0; i < a.rows(); ++i) {
        const double* arow = a.data() + static_cast<size_t>(i) * a.cols();
        for (int j = 0; j < b.rows(); ++j) {
            const double* brow = b.data() + static_cast<size_t>(j) * b.cols();
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
            out.at(i, j) = s;
        }
    }
    return out;
}

// a^T * b
Matrix matmul_tn_plain(const Matrix& a, const Matrix& b) {
    Matrix out(a.cols(), b.cols());
    for (int k = 0; k < a.rows(); ++k) {
        const double* arow = a.data() + static_cast<size_t>(k) * a.cols();
        const double* brow = b.data() + static_cast<size_t>(k) * b.cols();
        for (int i = 0; i < a.cols(); ++i) {
            double aki = arow[i];
            if (aki == 0.0) continue;
            double* orow = out.data() + static_cast<size_t>(i) * out.cols();
            for (int j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

void accumulate(Matrix& dst, const Matrix& src) {
    for (size_t i = 0; i < dst.values().size(); ++i) dst.values()[i] += src.values()[i];
}

}  // namespace

Var Tape::matmul(Var a, Var b) {
    const Matrix& av = val(a);
    const Matrix& bv = val(b);
    if (av.cols() != bv.rows()) {
        throw ShapeError("matmul: inner dimensions disagree, " + av.shape_str() + " * " + bv.shape_str());
    }
    Matrix out = matmul_plain(av, bv);
    return push(std::move(out), [this, a, b, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        accumulate(grad_mut(a), matmul_nt_plain(g, nodes_[b.id].value));
        accumulate(grad_mut(b), matmul_tn_plain(nodes_[a.id].value, g));
    }, "matmul");
}

Var Tape::matmul_nt(Var a, Var b) {
    const Matrix& av = val(a);
    const Matrix& bv = val(b);
    if (av.cols() != bv.cols()) {
        throw ShapeError("matmul_nt: inner dimensions disagree, " + av.shape_str() + " * " + bv.shape_str() + "^T");
    }
    Matrix out = matmul_nt_plain(av, bv);
    return push(std::move(out), [this, a, b, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        accumulate(grad_mut(a), matmul_plain(g, nodes_[b.id].value));
        accumulate(grad_mut(b), matmul_tn_plain(g, nodes_[a.id].value));
    }, "matmul_nt");
}

Var Tape::transpose(Var x) {
    const Matrix& xv = val(x);
    Matrix out(xv.cols(), xv.rows());
    for (int i = 0; i < xv.rows(); ++i)
        for (int j = 0; j < xv.cols(); ++j) out.at(j, i) = xv.at(i, j);
    return push(std::move(out), [this, x, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        Matrix& gx = grad_mut(x);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) gx.at(j, i) += g.at(i, j);
    }, "transpose");
}

Var Tape::activation(Var x, Act kind) {
    const Matrix& xv = val(x);
    Matrix out = xv;
    switch (kind) {
        case Act::Relu:
            for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
            break;
        case Act::Elu:
            for (auto& v : out.values()) v = v > 0.0 ? v : std::exp(v) - 1.0;
            break;
        case Act::Exp:
            for (auto& v : out.values()) {
                if (v > 700.0) throw NumericError("activation: exp overflow (input > 700)");
                v = std::exp(v);
            }
            break;
        case Act::Sigmoid:
            for (auto& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
            break;
        case Act::Tanh:
            for (auto& v : out.values()) v = std::tanh(v);
            break;
    }
    return push(std::move(out), [this, x, kind, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        const Matrix& xv2 = nodes_[x.id].value;
        const Matrix& yv = nodes_[out_id].value;
        Matrix& gx = grad_mut(x);
        for (size_t i = 0; i < g.values().size(); ++i) {
            double d = 0.0;
            switch (kind) {
                case Act::Relu: d = xv2.values()[i] > 0.0 ? 1.0 : 0.0; break;
                case Act::Elu: d = xv2.values()[i] > 0.0 ? 1.0 : yv.values()[i] + 1.0; break;
                case Act::Exp: d = yv.values()[i]; break;
                case Act::Sigmoid: d = yv.values()[i] * (1.0 - yv.values()[i]); break;
                case Act::Tanh: d = 1.0 - yv.values()[i] * yv.values()[i]; break;
            }
            gx.values()[i] += g.values()[i] * d;
        }
    }, "activation");
}

Var Tape::softmax_rows(Var x) {
    const Matrix& xv = val(x);
    Matrix out = xv;
    for (int i = 0; i < out.rows(); ++i) {
        double mx = out.at(i, 0);
        for (int j = 1; j < out.cols(); ++j) mx = std::max(mx, out.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < out.cols(); ++j) {
            out.at(i, j) = std::exp(out.at(i, j) - mx);
            sum += out.at(i, j);
        }
        for (int j = 0; j < out.cols(); ++j) out.at(i, j) /= sum;
    }
    return push(std::move(out), [this, x, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        const Matrix& y = nodes_[out_id].value;
        Matrix& gx = grad_mut(x);
        for (int i = 0; i < g.rows(); ++i) {
            double dot = 0.0;
            for (int j = 0; j < g.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
            for (int j = 0; j < g.cols(); ++j) gx.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
        }
    }, "softmax_rows");
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
    const Matrix& xv = val(x);
    const Matrix& gv = val(gain);
    const Matrix& bv = val(bias);
    if (eps <= 0.0) throw NumericError("layer_norm: eps must be positive");
    if (gv.rows() != 1 || gv.cols() != xv.cols() || bv.rows() != 1 || bv.cols() != xv.cols()) {
        throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(xv.cols()));
    }
    int n = xv.rows(), d = xv.cols();
    Matrix out(n, d);
    for (int i = 0; i < n; ++i) {
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += xv.at(i, j);
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            double c = xv.at(i, j) - mu;
            var += c * c;
        }
        var /= d;
        double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < d; ++j) {
            out.at(i, j) = gv.at(0, j) * (xv.at(i, j) - mu) * inv + bv.at(0, j);
        }
    }
    return push(std::move(out), [this, x, gain, bias, eps, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        const Matrix& xv2 = nodes_[x.id].value;
        const Matrix& gv2 = nodes_[gain.id].value;
        Matrix& gx = grad_mut(x);
        Matrix& gg = grad_mut(gain);
        Matrix& gb = grad_mut(bias);
        int n2 = xv2.rows(), d2 = xv2.cols();
        for (int i = 0; i < n2; ++i) {
            double mu = 0.0;
            for (int j = 0; j < d2; ++j) mu += xv2.at(i, j);
            mu /= d2;
            double var = 0.0;
            for (int j = 0; j < d2; ++j) {
                double c = xv2.at(i, j) - mu;
                var += c * c;
            }
            var /= d2;
            double inv = 1.0 / std::sqrt(var + eps);

            double dvar = 0.0, dmu = 0.0;
            for (int j = 0; j < d2; ++j) {
                double dxhat = g.at(i, j) * gv2.at(0, j);
                double cent = xv2.at(i, j) - mu;
                dvar += dxhat * cent * (-0.5) * inv * inv * inv;
                dmu += -dxhat * inv;
            }
            for (int j = 0; j < d2; ++j) {
                double dxhat = g.at(i, j) * gv2.at(0, j);
                double cent = xv2.at(i, j) - mu;
                gx.at(i, j) += dxhat * inv + dvar * 2.0 * cent / d2 + dmu / d2;
                gg.at(0, j) += g.at(i, j) * cent * inv;
                gb.at(0, j) += g.at(i, j);
            }
        }
    }, "layer_norm");
}

Var Tape::mean_rows(Var x) {
    const Matrix& xv = val(x);
    if (xv.rows() < 1) throw ShapeError("mean_rows: empty matrix");
    Matrix out(1, xv.cols());
    for (int i = 0; i < xv.rows(); ++i)
        for (int j = 0; j < xv.cols(); ++j) out.at(0, j) += xv.at(i, j);
    for (int j = 0; j < xv.cols(); ++j) out.at(0, j) /= xv.rows();
    return push(std::move(out), [this, x, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        Matrix& gx = grad_mut(x);
        double scale = 1.0 / gx.rows();
        for (int i = 0; i < gx.rows(); ++i)
            for (int j = 0; j < gx.cols(); ++j) gx.at(i, j) += g.at(0, j) * scale;
    }, "mean_rows");
}

Var Tape::max_rows(Var x) {
    const Matrix& xv = val(x);
    if (xv.rows() < 1) throw ShapeError("max_rows: empty matrix");
    Matrix out(1, xv.cols());
    std::vector<int> argmax(xv.cols(), 0);
    for (int j = 0; j < xv.cols(); ++j) {
        double best = xv.at(0, j);
        for (int i = 1; i < xv.rows(); ++i) {
            if (xv.at(i, j) > best) {
                best = xv.at(i, j);
                argmax[j] = i;
            }
        }
        out.at(0, j) = best;
    }
    return push(std::move(out), [this, x, argmax, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        Matrix& gx = grad_mut(x);
        for (int j = 0; j < g.cols(); ++j) gx.at(argmax[j], j) += g.at(0, j);
    }, "max_rows");
}

Var Tape::sum_all(Var x) {
    const Matrix& xv = val(x);
    double s = 0.0;
    for (double v : xv.values()) s += v;
    Matrix out(1, 1);
    out.at(0, 0) = s;
    return push(std::move(out), [this, x, out_id = static_cast<int>(nodes_.size())]() {
        double g = nodes_[out_id].grad.at(0, 0);
        for (auto& v : grad_mut(x).values()) v += g;
    }, "sum_all");
}

Var Tape::logsumexp_cols(Var x) {
    const Matrix& xv = val(x);
    if (xv.rows() < 1) throw ShapeError("logsumexp_cols: empty matrix");
    Matrix out(1, xv.cols());
    for (int j = 0; j < xv.cols(); ++j) {
        double mx = xv.at(0, j);
        for (int i = 1; i < xv.rows(); ++i) mx = std::max(mx, xv.at(i, j));
        double sum = 0.0;
        for (int i = 0; i < xv.rows(); ++i) sum += std::exp(xv.at(i, j) - mx);
        out.at(0, j) = mx + std::log(sum);
    }
    return push(std::move(out), [this, x, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        const Matrix& y = nodes_[out_id].value;
        const Matrix& xv2 = nodes_[x.id].value;
        Matrix& gx = grad_mut(x);
        for (int j = 0; j < xv2.cols(); ++j)
            for (int i = 0; i < xv2.rows(); ++i)
                gx.at(i, j) += g.at(0, j) * std::exp(xv2.at(i, j) - y.at(0, j));
    }, "logsumexp_cols");
}

Var Tape::add_row_broadcast(Var x, Var row) {
    const Matrix& xv = val(x);
    const Matrix& rv = val(row);
    if (rv.rows() != 1 || rv.cols() != xv.cols()) {
        throw ShapeError("add_row_broadcast: row must be 1x" + std::to_string(xv.cols()));
    }
    Matrix out = xv;
    for (int i = 0; i < out.rows(); ++i)
        for (int j = 0; j < out.cols(); ++j) out.at(i, j) += rv.at(0, j);
    return push(std::move(out), [this, x, row, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        Matrix& gx = grad_mut(x);
        Matrix& gr = grad_mut(row);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) {
                gx.at(i, j) += g.at(i, j);
                gr.at(0, j) += g.at(i, j);
            }
    }, "add_row_broadcast");
}

Var Tape::add_col_broadcast(Var x, Var col) {
    const Matrix& xv = val(x);
    const Matrix& cv = val(col);
    if (cv.cols() != 1 || cv.rows() != xv.rows()) {
        throw ShapeError("add_col_broadcast: col must be " + std::to_string(xv.rows()) + "x1");
    }
    Matrix out = xv;
    for (int i = 0; i < out.rows(); ++i)
        for (int j = 0; j < out.cols(); ++j) out.at(i, j) += cv.at(i, 0);
    return push(std::move(out), [this, x, col, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        Matrix& gx = grad_mut(x);
        Matrix& gc = grad_mut(col);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) {
                gx.at(i, j) += g.at(i, j);
                gc.at(i, 0) += g.at(i, j);
            }
    }, "add_col_broadcast");
}

Var Tape::broadcast_rows(Var row, int n) {
    const Matrix& rv = val(row);
    if (rv.rows() != 1) throw ShapeError("broadcast_rows: input must be a row vector");
    if (n < 1) throw ShapeError("broadcast_rows: n must be >= 1");
    Matrix out(n, rv.cols());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < rv.cols(); ++j) out.at(i, j) = rv.at(0, j);
    return push(std::move(out), [this, row, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        Matrix& gr = grad_mut(row);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) gr.at(0, j) += g.at(i, j);
    }, "broadcast_rows");
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no parts");
    int cols = val(parts[0]).cols();
    int rows = 0;
    for (Var p : parts) {
        if (val(p).cols() != cols) throw ShapeError("concat_rows: column counts differ");
        rows += val(p).rows();
    }
    Matrix out(rows, cols);
    int r = 0;
    for (Var p : parts) {
        const Matrix& pv = val(p);
        for (int i = 0; i < pv.rows(); ++i, ++r)
            for (int j = 0; j < cols; ++j) out.at(r, j) = pv.at(i, j);
    }
    return push(std::move(out), [this, parts, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        int r2 = 0;
        for (Var p : parts) {
            Matrix& gp = grad_mut(p);
            for (int i = 0; i < gp.rows(); ++i, ++r2)
                for (int j = 0; j < gp.cols(); ++j) gp.at(i, j) += g.at(r2, j);
        }
    }, "concat_rows");
}

Var Tape::concat_cols(Var a, Var b) {
    const Matrix& av = val(a);
    const Matrix& bv = val(b);
    if (av.rows() != bv.rows()) throw ShapeError("concat_cols: row counts differ");
    Matrix out(av.rows(), av.cols() + bv.cols());
    for (int i = 0; i < av.rows(); ++i) {
        for (int j = 0; j < av.cols(); ++j) out.at(i, j) = av.at(i, j);
        for (int j = 0; j < bv.cols(); ++j) out.at(i, av.cols() + j) = bv.at(i, j);
    }
    return push(std::move(out), [this, a, b, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        Matrix& ga = grad_mut(a);
        Matrix& gb = grad_mut(b);
        for (int i = 0; i < ga.rows(); ++i) {
            for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(i, j);
            for (int j = 0; j < gb.cols(); ++j) gb.at(i, j) += g.at(i, ga.cols() + j);
        }
    }, "concat_cols");
}

Var Tape::slice_rows(Var x, int begin, int end) {
    const Matrix& xv = val(x);
    if (begin < 0 || end > xv.rows() || begin >= end) throw ShapeError("slice_rows: bad range");
    Matrix out(end - begin, xv.cols());
    for (int i = begin; i < end; ++i)
        for (int j = 0; j < xv.cols(); ++j) out.at(i - begin, j) = xv.at(i, j);
    return push(std::move(out), [this, x, begin, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        Matrix& gx = grad_mut(x);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) gx.at(begin + i, j) += g.at(i, j);
    }, "slice_rows");
}

Var Tape::slice_cols(Var x, int begin, int end) {
    const Matrix& xv = val(x);
    if (begin < 0 || end > xv.cols() || begin >= end) throw ShapeError("slice_cols: bad range");
    Matrix out(xv.rows(), end - begin);
    for (int i = 0; i < xv.rows(); ++i)
        for (int j = begin; j < end; ++j) out.at(i, j - begin) = xv.at(i, j);
    return push(std::move(out), [this, x, begin, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        Matrix& gx = grad_mut(x);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) gx.at(i, begin + j) += g.at(i, j);
    }, "slice_cols");
}

Var Tape::embedding_rows(Var table, const std::vector<int>& ids) {
    const Matrix& tv = val(table);
    Matrix out(static_cast<int>(ids.size()), tv.cols());
    for (size_t t = 0; t < ids.size(); ++t) {
        if (ids[t] < 0 || ids[t] >= tv.rows()) {
            throw ShapeError("embedding_rows: index " + std::to_string(ids[t]) + " out of range for table with " +
                             std::to_string(tv.rows()) + " rows");
        }
        for (int j = 0; j < tv.cols(); ++j) out.at(static_cast<int>(t), j) = tv.at(ids[t], j);
    }
    return push(std::move(out), [this, table, ids, out_id = static_cast<int>(nodes_.size())]() {
        const Matrix& g = nodes_[out_id].grad;
        Matrix& gt = grad_mut(table);
        for (size_t t = 0; t < ids.size(); ++t)
            for (int j = 0; j < g.cols(); ++j) gt.at(ids[t], j) += g.at(static_cast<int>(t), j);
    }, "embedding_rows");
}

Var Tape::cross_entropy_logits(Var logits, int target) {
    const Matrix& lv = val(logits);
    if (lv.rows() != 1) throw ShapeError("cross_entropy_logits: logits must be a row vector");
    if (target < 0 || target >= lv.cols()) throw ShapeError("cross_entropy_logits: target out of range");
    double mx = lv.at(0, 0);
    for (int j = 1; j < lv.cols(); ++j) mx = std::max(mx, lv.at(0, j));
    double sum = 0.0;
    for (int j = 0; j < lv.cols(); ++j) sum += std::exp(lv.at(0, j) - mx);
    Matrix out(1, 1);
    out.at(0, 0) = mx + std::log(sum) - lv.at(0, target);
    return push(std::move(out), [this, logits, target, out_id = static_cast<int>(nodes_.size())]() {
        double g = nodes_[out_id].grad.at(0, 0);
        const Matrix& lv2 = nodes_[logits.id].value;
        Matrix& gl = grad_mut(logits);
        double mx2 = lv2.at(0, 0);
        for (int j = 1; j < lv2.cols(); ++j) mx2 = std::max(mx2, lv2.at(0, j));
        double sum2 = 0.0;
        for (int j = 0; j < lv2.cols(); ++j) sum2 += std::exp(lv2.at(0, j) - mx2);
        for (int j = 0; j < lv2.cols(); ++j) {
            double p = std::exp(lv2.at(0, j) - mx2) / sum2;
            gl.at(0, j) += g * (p - (j == target ? 1.0 : 0.0));
        }
    }, "cross_entropy_logits");
}

Var Tape::path_score(Var emissions, Var transitions, Var start, const std::vector<int>& labels) {
    const Matrix& ev = val(emissions);
    const Matrix& tv = val(transitions);
    const Matrix& sv = val(start);
    int n = ev.rows(), L = ev.cols();
    if (static_cast<int>(labels.size()) != n) throw ShapeError("path_score: label count != sequence length");
    if (tv.rows() != L || tv.cols() != L) throw ShapeError("path_score: transition matrix must be LxL");
    if (sv.rows() != 1 || sv.cols() != L) throw ShapeError("path_score: start vector must be 1xL");
    for (int y : labels) {
        if (y < 0 || y >= L) throw ShapeError("path_score: label " + std::to_string(y) + " out of range");
    }
    double s = sv.at(0, labels[0]);
    for (int t = 0; t < n; ++t) s += ev.at(t, labels[t]);
    for (int t = 1; t < n; ++t) s += tv.at(labels[t - 1], labels[t]);
    Matrix out(1, 1);
    out.at(0, 0) = s;
    return push(std::move(out), [this, emissions, transitions, start, labels,
                                 out_id = static_cast<int>(nodes_.size())]() {
        double g = nodes_[out_id].grad.at(0, 0);
        Matrix& ge = grad_mut(emissions);
        Matrix& gt = grad_mut(transitions);
        Matrix& gs = grad_mut(start);
        gs.at(0, labels[0]) += g;
        for (size_t t = 0; t < labels.size(); ++t) ge.at(static_cast<int>(t), labels[t]) += g;
        for (size_t t = 1; t < labels.size(); ++t) gt.at(labels[t - 1], labels[t]) += g;
    }, "path_score");
}

void Tape::backward(Var scalar_loss) {
    if (!record_) throw Error("backward: tape was created without recording");
    if (!scalar_loss.valid() || scalar_loss.id >= static_cast<int>(nodes_.size())) {
        throw Error("backward: invalid loss reference");
    }
    const Matrix& lv = nodes_[scalar_loss.id].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ShapeError("backward: loss must be 1x1, got " + lv.shape_str());
    }
    for (auto& node : nodes_) {
        node.grad = Matrix(node.value.rows(), node.value.cols());
    }
    nodes_[scalar_loss.id].grad.at(0, 0) = 1.0;
    for (int i = scalar_loss.id; i >= 0; --i) {
        if (nodes_[i].back) nodes_[i].back();
    }
}

}  // namespace han
