#include "han/optimizer.hpp"

#include <cmath>

#include "han/errors.hpp"

namespace han {

Optimizer::Optimizer(Kind kind, double lr, double beta1, double beta2, double eps)
    : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (lr <= 0.0) throw ConfigError("optimizer: lr must be positive");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
        throw ConfigError("optimizer: betas must lie in (0,1)");
    }
}

Optimizer::Kind Optimizer::kind_from_string(const std::string& s) {
    if (s == "radam") return Kind::RAdam;
    if (s == "adam") return Kind::Adam;
    throw ConfigError("unknown optimizer '" + s + "'");
}

namespace {

double rho_t(double rho_inf, double beta2, long t) {
    double b2t = std::pow(beta2, static_cast<double>(t));
    return rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
}

}  // namespace

bool Optimizer::next_step_rectified() const {
    if (kind_ != Kind::RAdam) return true;
    double rho_inf = 2.0 / (1.0 - beta2_) - 1.0;
    return rho_t(rho_inf, beta2_, t_ + 1) > 4.0;
}

void Optimizer::step(ParamStore& ps) {
    for (const auto& [name, e] : ps.entries()) {
        if (!e.grad.all_finite()) {
            throw NumericError("optimizer: non-finite gradient for parameter " + name + "; step aborted");
        }
    }
    ++t_;
    double b1t = std::pow(beta1_, static_cast<double>(t_));
    double b2t = std::pow(beta2_, static_cast<double>(t_));
    double rho_inf = 2.0 / (1.0 - beta2_) - 1.0;
    double rho = rho_t(rho_inf, beta2_, t_);
    bool rectified = kind_ == Kind::Adam || rho > 4.0;
    double rect = 1.0;
    if (kind_ == Kind::RAdam && rectified) {
        rect = std::sqrt(((rho - 4.0) * (rho - 2.0) * rho_inf) / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho));
    }

    for (auto& [name, e] : ps.entries()) {
        Matrix& m = m_.try_emplace(name, Matrix(e.value.rows(), e.value.cols())).first->second;
        Matrix& v = v_.try_emplace(name, Matrix(e.value.rows(), e.value.cols())).first->second;
        for (size_t i = 0; i < e.value.values().size(); ++i) {
            double g = e.grad.values()[i];
            double& mi = m.values()[i];
            double& vi = v.values()[i];
            mi = beta1_ * mi + (1.0 - beta1_) * g;
            vi = beta2_ * vi + (1.0 - beta2_) * g * g;
            double m_hat = mi / (1.0 - b1t);
            if (rectified) {
                double v_hat = std::sqrt(vi / (1.0 - b2t));
                e.value.values()[i] -= lr_ * rect * m_hat / (v_hat + eps_);
            } else {
                e.value.values()[i] -= lr_ * m_hat;
            }
        }
        check_finite(e.value, "optimizer step");
    }
}

double clip_gradients(ParamStore& ps, double max_norm) {
    double norm = std::sqrt(ps.grad_sq_norm());
    if (max_norm > 0.0 && norm > max_norm && norm > 0.0) {
        ps.scale_grads(max_norm / norm);
    }
    return norm;
}

}  // namespace han
