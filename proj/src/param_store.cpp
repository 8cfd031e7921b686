#include "han/param_store.hpp"

#include "han/errors.hpp"

namespace han {

Matrix& ParamStore::create(const std::string& name, Matrix initial) {
    if (entries_.count(name)) throw Error("ParamStore: duplicate parameter name " + name);
    check_finite(initial, "ParamStore::create");
    Entry e;
    e.grad = Matrix(initial.rows(), initial.cols());
    e.value = std::move(initial);
    auto [it, ok] = entries_.emplace(name, std::move(e));
    (void)ok;
    return it->second.value;
}

ParamStore::Entry& ParamStore::find(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error("ParamStore: unknown parameter " + name);
    return it->second;
}

Matrix& ParamStore::value(const std::string& name) { return find(name).value; }

const Matrix& ParamStore::value(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error("ParamStore: unknown parameter " + name);
    return it->second.value;
}

Matrix& ParamStore::grad(const std::string& name) { return find(name).grad; }

void ParamStore::zero_grads() {
    for (auto& [name, e] : entries_) {
        for (auto& g : e.grad.values()) g = 0.0;
    }
}

void ParamStore::scale_grads(double factor) {
    for (auto& [name, e] : entries_) {
        for (auto& g : e.grad.values()) g *= factor;
    }
}

double ParamStore::grad_sq_norm() const {
    double s = 0.0;
    for (const auto& [name, e] : entries_) {
        for (double g : e.grad.values()) s += g * g;
    }
    return s;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

Var BoundParams::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Var v = tape_->leaf(store_->value(name));
    bound_.emplace(name, v);
    return v;
}

void BoundParams::flush_grads() {
    for (const auto& [name, var] : bound_) {
        const Matrix& g = tape_->grad(var);
        if (g.size() == 0) continue;  // backward not run or unreachable
        Matrix& acc = store_->grad(name);
        for (size_t i = 0; i < acc.values().size(); ++i) acc.values()[i] += g.values()[i];
    }
}

}  // namespace han
