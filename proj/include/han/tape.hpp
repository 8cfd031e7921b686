#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "han/matrix.hpp"

namespace han {

enum class Act { Relu, Elu, Exp, Sigmoid, Tanh };

Act act_from_string(const std::string& s);
std::string act_to_string(Act a);

// Handle into a Tape node.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff tape. Nodes are appended in evaluation order, which
// is a topological order by construction; backward() walks them once in
// reverse. Every op validates shapes and polices NaN/Inf on its output.
// Node storage is a deque so val()/grad() references stay valid while more
// ops are recorded.
//
// A tape constructed with record=false evaluates values only (no backward
// closures); used for cheap forward passes such as finite differencing.
class Tape {
public:
    explicit Tape(bool record = true) : record_(record) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Matrix value);

    const Matrix& val(Var v) const { return nodes_[v.id].value; }
    const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
    size_t size() const { return nodes_.size(); }

    Var add(Var a, Var b);
    Var scale(Var x, double c);
    Var hadamard(Var a, Var b);
    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);  // a * b^T
    Var transpose(Var x);
    Var activation(Var x, Act kind);
    Var softmax_rows(Var x);
    Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
    Var mean_rows(Var x);      // 1 x cols, average over rows
    Var max_rows(Var x);       // 1 x cols, column-wise max
    Var sum_all(Var x);        // 1 x 1
    Var logsumexp_cols(Var x); // 1 x cols, log-sum-exp down each column
    Var add_row_broadcast(Var x, Var row);
    Var add_col_broadcast(Var x, Var col);
    Var broadcast_rows(Var row, int n);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(Var a, Var b);
    Var slice_rows(Var x, int begin, int end);
    Var slice_cols(Var x, int begin, int end);
    Var embedding_rows(Var table, const std::vector<int>& ids);
    Var cross_entropy_logits(Var logits, int target);
    // Linear-chain path score: start[y0] + sum_t emissions[t,yt] + sum_t T[y(t-1),yt].
    Var path_score(Var emissions, Var transitions, Var start, const std::vector<int>& labels);

    // Populates gradients of every node reachable from `scalar_loss`
    // (unreachable gradients stay zero). Loss must be 1x1.
    void backward(Var scalar_loss);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void()> back;
    };

    Var push(Matrix value, std::function<void()> back, const char* opname);
    Matrix& grad_mut(Var v) { return nodes_[v.id].grad; }

    std::deque<Node> nodes_;
    bool record_;

    friend class BoundParams;
};

}  // namespace han
