#include "mesa/restore.hpp"

#include <algorithm>
#include <random>

namespace mesa {

InitMode init_mode_from_name(const std::string& name) {
    if (name == "input") return InitMode::Input;
    if (name == "noise") return InitMode::Noise;
    throw std::invalid_argument("unknown init mode: " + name);
}

const char* init_mode_name(InitMode m) { return m == InitMode::Input ? "input" : "noise"; }

namespace {

std::vector<int> argmin_of(const LayerLossReport& report) {
    std::vector<int> out;
    out.reserve(report.layers.size());
    for (const auto& l : report.layers) out.push_back(l.argmin.value_or(-1));
    return out;
}

}  // namespace

MaskedStyleObjective::MaskedStyleObjective(const ImageTensor& damaged, const BinaryMask& mask,
                                           const Backbone& net, const ExemplarPool& pool,
                                           const LayerWeighting& weighting, const RestorationConfig& cfg)
    : damaged_(damaged), mask_(mask), cfg_(cfg), evaluator_(net, pool, weighting, cfg.aggregation),
      hw_(damaged.height * damaged.width) {
    if (damaged.height != mask.height || damaged.width != mask.width)
        throw std::invalid_argument("restore: image/mask dimension mismatch");
    pre_.height = damaged.height;
    pre_.width = damaged.width;
    pre_.planes.resize(hw_, 3);
}

Eigen::VectorXd MaskedStyleObjective::initial_point() const {
    Eigen::VectorXd x(3 * hw_);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < hw_; ++i) x[c * hw_ + i] = damaged_.data[static_cast<size_t>(i) * 3 + c];
    if (cfg_.init == InitMode::Noise) {
        std::mt19937_64 rng(cfg_.noise_seed);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (int i = 0; i < hw_; ++i) {
            if (!mask_.data[i]) continue;
            for (int c = 0; c < 3; ++c) x[c * hw_ + i] = uni(rng);
        }
    }
    return x;
}

double MaskedStyleObjective::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad,
                                      LayerLossReport* report) const {
    // composite + clamp in pixel space, then mean subtraction
    for (int c = 0; c < 3; ++c) {
        double* dst = pre_.planes.col(c).data();
        const double mean = kChannelMeans[c];
        const double* src = x.data() + static_cast<std::ptrdiff_t>(c) * hw_;
        for (int i = 0; i < hw_; ++i) {
            const bool editable = !cfg_.mask_every_step || mask_.data[i] != 0;
            const double pix = editable ? clamp01(src[i]) : damaged_.data[static_cast<size_t>(i) * 3 + c];
            dst[i] = pix - mean;
        }
    }
    if (!grad) return evaluator_.total_loss(pre_, report);

    const double loss = evaluator_.total_loss_with_gradient(pre_, grad_planes_, report);
    grad->resize(3 * hw_);
    for (int c = 0; c < 3; ++c) {
        const double* gsrc = grad_planes_.col(c).data();
        const double* src = x.data() + static_cast<std::ptrdiff_t>(c) * hw_;
        double* gdst = grad->data() + static_cast<std::ptrdiff_t>(c) * hw_;
        for (int i = 0; i < hw_; ++i) {
            const bool editable = !cfg_.mask_every_step || mask_.data[i] != 0;
            const bool in_range = src[i] >= 0.0 && src[i] <= 1.0;
            gdst[i] = (editable && in_range) ? gsrc[i] : 0.0;
        }
    }
    return loss;
}

ImageTensor MaskedStyleObjective::to_image(const Eigen::VectorXd& x) const {
    ImageTensor est(damaged_.height, damaged_.width);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < hw_; ++i) est.data[static_cast<size_t>(i) * 3 + c] = x[c * hw_ + i];
    return composite(est, damaged_, mask_);
}

RestorationResult restore(const ImageTensor& damaged, const BinaryMask& mask, const Backbone& net,
                          const ExemplarPool& pool, const LayerWeighting& weighting,
                          const RestorationConfig& cfg, const ProgressFn& progress) {
    if (damaged.height != mask.height || damaged.width != mask.width)
        throw std::invalid_argument("restore: image/mask dimension mismatch");
    if (cfg.max_iterations < 1) throw std::invalid_argument("restore: max_iterations must be >= 1");
    if (cfg.layers.empty()) throw std::invalid_argument("restore: no layers configured");
    {
        auto a = cfg.layers;
        auto b = weighting.layers();
        auto by_id = [](LayerId l, LayerId r) { return static_cast<int>(l) < static_cast<int>(r); };
        std::sort(a.begin(), a.end(), by_id);
        std::sort(b.begin(), b.end(), by_id);
        if (a != b) throw std::invalid_argument("restore: weighting does not match the configured layers");
    }

    RestorationResult res;
    if (mask.all_zero()) {
        res.output = damaged;
        res.no_op = true;
        res.stop_reason = StopReason::Converged;
        return res;
    }

    const MaskedStyleObjective objective(damaged, mask, net, pool, weighting, cfg);
    Eigen::VectorXd x = objective.initial_point();

    LayerLossReport last_report;
    bool first_eval = true;
    auto fg = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
        const double loss = objective.evaluate(v, &grad, &last_report);
        if (first_eval) {
            res.initial_loss = loss;
            first_eval = false;
        }
        return loss;
    };

    auto on_iter = [&](int iter, double loss, const Eigen::VectorXd& v) {
        res.loss_trace.push_back(loss);
        res.argmin_trace.push_back(argmin_of(last_report));
        if (progress && cfg.log_every > 0 && iter % cfg.log_every == 0) {
            IterationRecord rec{iter, loss, res.argmin_trace.back()};
            progress(rec, objective.to_image(v));
        }
    };

    LbfgsOptions lopt;
    lopt.max_iterations = cfg.max_iterations;
    lopt.history = cfg.lbfgs_history;
    lopt.loss_tol = cfg.convergence_tol;

    const LbfgsSummary summary = lbfgs_minimize(fg, x, lopt, on_iter);

    res.iterations_run = summary.iterations;
    res.stop_reason = summary.reason;
    res.output = objective.to_image(x);
    StyleLossEvaluator(net, pool, weighting, cfg.aggregation).total_loss(preprocess(res.output), &res.final_report);
    if (progress && (cfg.log_every <= 0 || summary.iterations % std::max(cfg.log_every, 1) != 0)) {
        IterationRecord rec{summary.iterations, summary.final_loss, argmin_of(res.final_report)};
        progress(rec, res.output);
    }
    return res;
}

}  // namespace mesa
