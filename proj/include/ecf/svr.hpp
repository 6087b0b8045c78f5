#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ecf/error.hpp"
#include "ecf/tensor.hpp"

namespace ecf {

/// C is the slack penalty (the margin-width control) and epsilon the
/// half-width of the insensitive tube. tolerance bounds the admissible KKT
/// violation at convergence; max_sweeps caps solver iterations.
struct SvrHyperparams {
    double C = 1.0;
    double epsilon = 0.1;
    double tolerance = 1e-6;
    std::size_t max_sweeps = 10000;

    void validate() const {
        if (C <= 0.0) raise(ErrorCode::DegenerateInput, "C must be > 0");
        if (epsilon < 0.0) raise(ErrorCode::DegenerateInput, "epsilon must be >= 0");
        if (tolerance <= 0.0) raise(ErrorCode::DegenerateInput, "tolerance must be > 0");
        if (max_sweeps == 0) raise(ErrorCode::DegenerateInput, "max_sweeps must be >= 1");
    }
};

/// Linear epsilon-insensitive regressor. dual_coefficients holds the signed
/// alpha_n - alpha*_n per training point, so w = sum_n beta_n x_n exactly.
struct SvrModel {
    std::vector<double> weights;
    double bias = 0.0;
    std::vector<double> dual_coefficients;
    bool converged = true;
    std::size_t sweeps_used = 0;
};

namespace detail {

inline void check_feature_matrix(const Matrix& features, std::size_t expected_cols,
                                 const char* what) {
    if (features.cols != expected_cols) {
        raise(ErrorCode::DimensionMismatch,
              std::string(what) + ": got " + std::to_string(features.cols) +
                  " feature columns, expected " + std::to_string(expected_cols));
    }
}

} // namespace detail

/// Row-wise w . x + b.
inline std::vector<double> predict_svr(const SvrModel& model, const Matrix& features) {
    detail::check_feature_matrix(features, model.weights.size(), "predict_svr");
    std::vector<double> out(features.rows);
    for (std::size_t r = 0; r < features.rows; ++r) {
        double acc = model.bias;
        for (std::size_t c = 0; c < features.cols; ++c) {
            acc += model.weights[c] * features.at(r, c);
        }
        out[r] = acc;
    }
    return out;
}

struct SvrObjective {
    double primal = 0.0;
    std::vector<double> xi;      // max(0, y - f - eps): target above the tube
    std::vector<double> xi_star; // max(0, f - y - eps): target below the tube
};

/// Primal objective 0.5*||w||^2 + C * sum (xi + xi*) with slacks reconstructed
/// from the tube.
inline SvrObjective svr_objective(const SvrModel& model, const Matrix& features,
                                  std::span<const double> targets, const SvrHyperparams& hp) {
    if (features.rows != targets.size()) {
        raise(ErrorCode::DimensionMismatch, "feature rows " + std::to_string(features.rows) +
                                                " vs targets " + std::to_string(targets.size()));
    }
    std::vector<double> f = predict_svr(model, features);
    SvrObjective obj;
    obj.xi.resize(features.rows);
    obj.xi_star.resize(features.rows);
    double slack_sum = 0.0;
    for (std::size_t n = 0; n < features.rows; ++n) {
        obj.xi[n] = std::max(0.0, targets[n] - f[n] - hp.epsilon);
        obj.xi_star[n] = std::max(0.0, f[n] - targets[n] - hp.epsilon);
        slack_sum += obj.xi[n] + obj.xi_star[n];
    }
    double w_norm_sq = 0.0;
    for (double w : model.weights) w_norm_sq += w * w;
    obj.primal = 0.5 * w_norm_sq + hp.C * slack_sum;
    return obj;
}

/// Dual objective -0.5*beta'K beta - eps*||beta||_1 + y' beta at the given
/// signed coefficients (linear kernel).
inline double svr_dual_objective(const Matrix& features, std::span<const double> targets,
                                 const SvrHyperparams& hp, std::span<const double> beta) {
    if (features.rows != targets.size() || beta.size() != targets.size()) {
        raise(ErrorCode::DimensionMismatch, "dual objective dimensions disagree");
    }
    std::vector<double> w(features.cols, 0.0);
    for (std::size_t n = 0; n < features.rows; ++n)
        for (std::size_t c = 0; c < features.cols; ++c) w[c] += beta[n] * features.at(n, c);
    double quad = 0.0;
    for (double v : w) quad += v * v;
    double value = -0.5 * quad;
    for (std::size_t n = 0; n < features.rows; ++n) {
        value += targets[n] * beta[n] - hp.epsilon * std::abs(beta[n]);
    }
    return value;
}

/// Fits the linear epsilon-SVR by SMO-style maximal-violating-pair updates on
/// the dual. One sweep selects and updates one pair while keeping the
/// equality constraint sum(beta) = 0 intact; the dual objective never
/// decreases. Optionally records the dual objective after every sweep.
inline SvrModel fit_svr(const Matrix& features, std::span<const double> targets,
                        const SvrHyperparams& hp, std::vector<double>* dual_trace = nullptr) {
    hp.validate();
    const std::size_t n = features.rows;
    if (n == 0) raise(ErrorCode::DegenerateInput, "no training samples");
    if (targets.size() != n) {
        raise(ErrorCode::DimensionMismatch, "feature rows " + std::to_string(n) +
                                                " vs targets " + std::to_string(targets.size()));
    }
    for (double v : features.values)
        if (!std::isfinite(v)) raise(ErrorCode::NonFinite, "non-finite feature value");
    for (double v : targets)
        if (!std::isfinite(v)) raise(ErrorCode::NonFinite, "non-finite target value");

    // Gram matrix of the raw points; variable s < n is alpha_s (z = +1),
    // variable s >= n is alpha*_{s-n} (z = -1).
    std::vector<double> K(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < features.cols; ++c)
                dot += features.at(i, c) * features.at(j, c);
            K[i * n + j] = dot;
            K[j * n + i] = dot;
        }
    }

    const std::size_t m2 = 2 * n;
    auto point = [n](std::size_t s) { return s < n ? s : s - n; };
    auto sign = [n](std::size_t s) { return s < n ? 1.0 : -1.0; };

    std::vector<double> theta(m2, 0.0);
    std::vector<double> grad(m2); // G = Q theta + p, starts at p
    for (std::size_t s = 0; s < m2; ++s) {
        grad[s] = s < n ? hp.epsilon - targets[s] : hp.epsilon + targets[s - n];
    }

    auto dual_value = [&]() {
        // -(0.5 theta'Q theta + p'theta) = -0.5 * sum theta_s (G_s + p_s)
        double acc = 0.0;
        for (std::size_t s = 0; s < m2; ++s) {
            double p = s < n ? hp.epsilon - targets[s] : hp.epsilon + targets[s - n];
            acc += theta[s] * (grad[s] + p);
        }
        return -0.5 * acc;
    };

    SvrModel model;
    model.converged = false;
    double m_up = 0.0, m_low = 0.0;
    std::size_t sweep = 0;
    for (; sweep < hp.max_sweeps; ++sweep) {
        // maximal violating pair
        std::size_t i = m2, j = m2;
        m_up = -std::numeric_limits<double>::infinity();
        m_low = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < m2; ++s) {
            double z = sign(s);
            double v = -z * grad[s];
            bool in_up = (z > 0.0) ? theta[s] < hp.C : theta[s] > 0.0;
            bool in_low = (z > 0.0) ? theta[s] > 0.0 : theta[s] < hp.C;
            if (in_up && v > m_up) {
                m_up = v;
                i = s;
            }
            if (in_low && v < m_low) {
                m_low = v;
                j = s;
            }
        }
        if (m_up - m_low < hp.tolerance) {
            model.converged = true;
            break;
        }

        std::size_t pi = point(i), pj = point(j);
        double zi = sign(i), zj = sign(j);
        double curvature = K[pi * n + pi] + K[pj * n + pj] - 2.0 * K[pi * n + pj];
        double cap_i = (zi > 0.0) ? hp.C - theta[i] : theta[i];
        double cap_j = (zj > 0.0) ? theta[j] : hp.C - theta[j];
        double step;
        if (curvature > 1e-12) {
            step = (m_up - m_low) / curvature; // = -(zi*Gi - zj*Gj)/curvature > 0
        } else {
            step = std::min(cap_i, cap_j); // flat direction: run to the box
        }
        step = std::min(step, std::min(cap_i, cap_j));
        theta[i] += zi * step;
        theta[j] -= zj * step;
        // pin bound hits exactly so the KKT audit can classify by value
        if (step == cap_i) theta[i] = (zi > 0.0) ? hp.C : 0.0;
        if (step == cap_j) theta[j] = (zj > 0.0) ? 0.0 : hp.C;
        theta[i] = std::clamp(theta[i], 0.0, hp.C);
        theta[j] = std::clamp(theta[j], 0.0, hp.C);
        for (std::size_t s = 0; s < m2; ++s) {
            grad[s] += sign(s) * step * (K[point(s) * n + pi] - K[point(s) * n + pj]);
        }
        if (dual_trace) dual_trace->push_back(dual_value());
    }
    model.sweeps_used = sweep;

    // bias from the optimality interval; free points pin it exactly
    model.bias = 0.5 * (m_up + m_low);

    // signed coefficients; clear any residual alpha/alpha* overlap (keeps
    // beta, w and the objective unchanged)
    model.dual_coefficients.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        model.dual_coefficients[s] = theta[s] - theta[s + n];
    }
    model.weights.assign(features.cols, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t c = 0; c < features.cols; ++c) {
            model.weights[c] += model.dual_coefficients[s] * features.at(s, c);
        }
    }
    return model;
}

/// Largest KKT violation of a fitted model on its training set: box bounds,
/// the equality constraint and the per-point residual conditions. Zero (up to
/// solver tolerance) certifies optimality.
inline double kkt_max_violation(const SvrModel& model, const Matrix& features,
                                std::span<const double> targets, const SvrHyperparams& hp) {
    if (model.dual_coefficients.size() != features.rows || targets.size() != features.rows) {
        raise(ErrorCode::DimensionMismatch, "KKT audit dimensions disagree");
    }
    std::vector<double> f = predict_svr(model, features);
    const double band = 1e-12 * std::max(1.0, hp.C);
    double worst = 0.0;
    double coeff_sum = 0.0;
    for (std::size_t s = 0; s < features.rows; ++s) {
        double beta = model.dual_coefficients[s];
        coeff_sum += beta;
        double r = targets[s] - f[s];
        worst = std::max(worst, std::abs(beta) - hp.C); // box
        if (std::abs(beta) <= band) {
            worst = std::max(worst, std::abs(r) - hp.epsilon);
        } else if (beta >= hp.C - band) {
            worst = std::max(worst, hp.epsilon - r);
        } else if (beta <= -hp.C + band) {
            worst = std::max(worst, r + hp.epsilon);
        } else if (beta > 0.0) {
            worst = std::max(worst, std::abs(r - hp.epsilon));
        } else {
            worst = std::max(worst, std::abs(r + hp.epsilon));
        }
    }
    worst = std::max(worst, std::abs(coeff_sum));
    return worst;
}

} // namespace ecf
