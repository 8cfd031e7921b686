#pragma once

#include <map>
#include <string>

#include "han/matrix.hpp"
#include "han/param_store.hpp"

namespace han {

// RAdam: rectified adaptive learning rate with a plain-momentum fallback
// while the variance estimate is untrustworthy (rho_t <= 4); switchable to
// classic Adam for differential debugging. Updates are deterministic
// functions of (params, grads, state).
class Optimizer {
public:
    enum class Kind { RAdam, Adam };

    Optimizer(Kind kind, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    static Kind kind_from_string(const std::string& s);

    // One update over every parameter in the store using its accumulated
    // gradient. Throws NumericError (and leaves values untouched) if any
    // gradient is non-finite.
    void step(ParamStore& ps);

    long steps() const { return t_; }
    double lr() const { return lr_; }

    // True when the upcoming step (t_ + 1) would take the rectified branch.
    bool next_step_rectified() const;

private:
    Kind kind_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::map<std::string, Matrix> m_;
    std::map<std::string, Matrix> v_;
};

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm. No-op (still returns the norm) if already small.
double clip_gradients(ParamStore& ps, double max_norm);

}  // namespace han
