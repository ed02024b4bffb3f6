#include "mesa/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace mesa {

const char* stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::MaxIterations: return "max_iter";
        case StopReason::Converged: return "converged";
        case StopReason::LineSearchFailure: return "line_search_failure";
    }
    return "?";
}

namespace {

struct Pair {
    Eigen::VectorXd s, y;
    double rho;
};

// Two-loop recursion: d = -H g, with H scaled by the latest curvature pair.
Eigen::VectorXd search_direction(const std::deque<Pair>& mem, const Eigen::VectorXd& g) {
    Eigen::VectorXd q = -g;
    if (mem.empty()) return q;
    std::vector<double> alpha(mem.size());
    for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
        alpha[i] = mem[i].rho * mem[i].s.dot(q);
        q -= alpha[i] * mem[i].y;
    }
    const auto& last = mem.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
    for (size_t i = 0; i < mem.size(); ++i) {
        const double beta = mem[i].rho * mem[i].y.dot(q);
        q += (alpha[i] - beta) * mem[i].s;
    }
    return q;
}

}  // namespace

LbfgsSummary lbfgs_minimize(const LbfgsObjective& objective, Eigen::VectorXd& x,
                            const LbfgsOptions& opt, const LbfgsCallback& on_iteration) {
    if (opt.max_iterations < 1) throw std::invalid_argument("lbfgs: max_iterations must be >= 1");
    if (opt.history < 1) throw std::invalid_argument("lbfgs: history must be >= 1");

    LbfgsSummary sum;
    const auto n = x.size();
    Eigen::VectorXd g(n), g_new(n);

    double f = objective(x, g);
    ++sum.evaluations;
    if (!std::isfinite(f)) throw std::runtime_error("lbfgs: non-finite loss at the initial point");
    sum.final_loss = f;

    if (g.lpNorm<Eigen::Infinity>() < 1e-15) {
        sum.reason = StopReason::Converged;  // already stationary (e.g. exact match)
        return sum;
    }

    std::deque<Pair> mem;
    Eigen::VectorXd x_trial(n);

    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        Eigen::VectorXd d = search_direction(mem, g);
        double dg = d.dot(g);
        if (!(dg < 0.0)) {  // not a descent direction: restart from steepest descent
            mem.clear();
            d = -g;
            dg = d.dot(g);
            if (!(dg < 0.0)) {
                sum.reason = StopReason::Converged;
                return sum;
            }
        }

        // Strong Wolfe line search: bracket then zoom (bisection).
        const double f0 = f;
        const double dg0 = dg;
        auto eval = [&](double a, double& fd) {
            x_trial = x + a * d;
            const double fa = objective(x_trial, g_new);
            ++sum.evaluations;
            fd = g_new.dot(d);
            return fa;
        };

        double lo = 0.0, hi = -1.0;  // hi < 0 means unbracketed
        double f_lo = f0;
        // First iteration: no curvature information yet, so start with a step
        // that moves the largest component by 0.05; afterwards the scaled
        // direction makes 1.0 the right default.
        double a = iter == 0 ? 0.05 / d.template lpNorm<Eigen::Infinity>() : 1.0;
        double a_prev = 0.0, f_prev = f0;
        bool accepted = false;
        double f_acc = 0.0;
        int evals = 0;

        while (evals < opt.max_line_search_evals) {
            double fd = 0.0;
            const double fa = eval(a, fd);
            ++evals;
            if (!std::isfinite(fa)) {  // step too long into bad territory
                hi = a;
                a = 0.5 * (lo + a);
                continue;
            }
            if (fa > f0 + opt.wolfe_c1 * a * dg0 || (evals > 1 && fa >= f_prev)) {
                lo = a_prev;
                f_lo = f_prev;
                hi = a;
                break;
            }
            if (std::abs(fd) <= -opt.wolfe_c2 * dg0) {
                accepted = true;
                f_acc = fa;
                break;
            }
            if (fd >= 0.0) {
                lo = a;
                f_lo = fa;
                hi = a_prev;
                break;
            }
            a_prev = a;
            f_prev = fa;
            a *= 2.0;
        }

        if (!accepted && hi >= 0.0) {
            // zoom on [lo, hi]
            while (evals < opt.max_line_search_evals) {
                a = 0.5 * (lo + hi);
                double fd = 0.0;
                const double fa = eval(a, fd);
                ++evals;
                if (!std::isfinite(fa) || fa > f0 + opt.wolfe_c1 * a * dg0 || fa >= f_lo) {
                    hi = a;
                } else {
                    if (std::abs(fd) <= -opt.wolfe_c2 * dg0) {
                        accepted = true;
                        f_acc = fa;
                        break;
                    }
                    if (fd * (hi - lo) >= 0.0) hi = lo;
                    lo = a;
                    f_lo = fa;
                }
                if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
            }
        }

        if (!accepted) {
            // Sufficient decrease without curvature is still a usable step if
            // the bracket collapsed onto one; otherwise the search failed.
            if (f_lo < f0 && lo > 0.0) {
                double fd = 0.0;
                f_acc = eval(lo, fd);
                ++evals;
                if (!(std::isfinite(f_acc) && f_acc < f0)) {
                    sum.reason = StopReason::LineSearchFailure;
                    return sum;
                }
                a = lo;
                accepted = true;
            } else {
                sum.reason = StopReason::LineSearchFailure;
                return sum;
            }
        }

        // accept the step (x_trial/g_new hold the last evaluated point == a)
        Eigen::VectorXd s = a * d;
        Eigen::VectorXd yv = g_new - g;
        x += s;
        g.swap(g_new);
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            mem.push_back({std::move(s), std::move(yv), 1.0 / sy});
            if (static_cast<int>(mem.size()) > opt.history) mem.pop_front();
        }

        f = f_acc;
        sum.iterations = iter + 1;
        sum.final_loss = f;
        if (on_iteration) on_iteration(sum.iterations, f, x);

        const double rel = std::abs(f0 - f) / std::max(std::abs(f0), 1e-300);
        if (rel <= opt.loss_tol) {
            sum.reason = StopReason::Converged;
            return sum;
        }
    }
    sum.reason = StopReason::MaxIterations;
    return sum;
}

}  // namespace mesa
