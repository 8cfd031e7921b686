#pragma once

#include <map>
#include <string>
#include <vector>

#include "han/matrix.hpp"
#include "han/tape.hpp"

namespace han {

// Named trainable parameters with matching gradient accumulators. Names are
// hierarchical paths ("encoder.l0.intent.block.w_k"); the map keeps them in
// a deterministic (sorted) order for optimizers and checkpoints.
class ParamStore {
public:
    struct Entry {
        Matrix value;
        Matrix grad;
    };

    Matrix& create(const std::string& name, Matrix initial);
    bool has(const std::string& name) const { return entries_.count(name) > 0; }

    Matrix& value(const std::string& name);
    const Matrix& value(const std::string& name) const;
    Matrix& grad(const std::string& name);

    void zero_grads();
    void scale_grads(double factor);
    double grad_sq_norm() const;

    size_t size() const { return entries_.size(); }
    std::vector<std::string> names() const;

    std::map<std::string, Entry>& entries() { return entries_; }
    const std::map<std::string, Entry>& entries() const { return entries_; }

private:
    Entry& find(const std::string& name);
    std::map<std::string, Entry> entries_;
};

// Per-tape view of a ParamStore: binds each parameter to a leaf Var on first
// use and, after backward(), flushes the leaf gradients back into the store.
class BoundParams {
public:
    BoundParams(Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {}

    Var operator()(const std::string& name);

    // Accumulates tape gradients of every bound parameter into the store.
    void flush_grads();

private:
    Tape* tape_;
    ParamStore* store_;
    std::map<std::string, Var> bound_;
};

}  // namespace han
