#include "mesa/exemplar_loss.hpp"

#include <algorithm>

namespace mesa {

Aggregation aggregation_from_name(const std::string& name) {
    if (name == "min") return Aggregation::Min;
    if (name == "avg" || name == "average") return Aggregation::Average;
    throw std::invalid_argument("unknown aggregation: " + name);
}

const char* aggregation_name(Aggregation a) { return a == Aggregation::Min ? "min" : "average"; }

ExemplarPool ExemplarPool::build(const Backbone& net, std::vector<ImageTensor> exemplars) {
    if (exemplars.empty()) throw std::invalid_argument("ExemplarPool: at least one exemplar required");
    ExemplarPool pool;
    pool.exemplars_ = std::move(exemplars);
    pool.grams_.reserve(pool.exemplars_.size());
    for (const auto& img : pool.exemplars_) pool.grams_.push_back(net.forward(preprocess(img)).grams());
    return pool;
}

double exemplar_layer_loss(const Eigen::MatrixXd& g_in, int k_in, const Eigen::MatrixXd& g_ex,
                           int k_ex, int filters) {
    if (g_in.rows() != filters || g_in.cols() != filters || g_ex.rows() != filters || g_ex.cols() != filters)
        throw std::invalid_argument("exemplar_layer_loss: Gram shape mismatch");
    if (k_in <= 0 || k_ex <= 0) throw std::invalid_argument("exemplar_layer_loss: non-positive spatial size");
    const double n2 = static_cast<double>(filters) * filters;
    const double diff2 = (g_in / static_cast<double>(k_in) - g_ex / static_cast<double>(k_ex)).squaredNorm();
    return diff2 / (4.0 * n2);
}

LayerAggregate layer_min_loss(const Eigen::MatrixXd& input_gram, int input_k, const ExemplarPool& pool,
                              LayerId layer, Aggregation mode) {
    if (pool.size() == 0) throw std::invalid_argument("layer_min_loss: empty exemplar pool");
    const int slot = static_cast<int>(layer);
    const int n = layer_info(layer).filters;
    LayerAggregate agg;
    agg.per_exemplar.reserve(pool.size());
    for (int i = 0; i < pool.size(); ++i) {
        const GramSet& gs = pool.grams(i);
        agg.per_exemplar.push_back(exemplar_layer_loss(input_gram, input_k, gs.g[slot], gs.k[slot], n));
    }
    if (mode == Aggregation::Min) {
        const auto it = std::min_element(agg.per_exemplar.begin(), agg.per_exemplar.end());
        agg.argmin = static_cast<int>(it - agg.per_exemplar.begin());
        agg.value = *it;
    } else {
        double sum = 0.0;
        for (double v : agg.per_exemplar) sum += v;
        agg.value = sum / pool.size();
    }
    return agg;
}

nlohmann::json LayerLossReport::to_json() const {
    nlohmann::ordered_json j;
    j["total"] = total;
    j["layers"] = nlohmann::ordered_json::array();
    for (const auto& l : layers) {
        nlohmann::ordered_json lj;
        lj["layer"] = layer_info(l.layer).name;
        lj["weight"] = l.weight;
        lj["value"] = l.value;
        if (l.argmin)
            lj["argmin"] = *l.argmin;
        else
            lj["argmin"] = nullptr;
        lj["per_exemplar"] = l.per_exemplar;
        j["layers"].push_back(std::move(lj));
    }
    return j;
}

StyleLossEvaluator::StyleLossEvaluator(const Backbone& net, const ExemplarPool& pool,
                                       LayerWeighting weighting, Aggregation mode)
    : net_(net), pool_(pool), weighting_(std::move(weighting)), mode_(mode) {
    if (weighting_.entries.empty())
        throw std::invalid_argument("StyleLossEvaluator: weighting covers no layers");
    weighting_.validate();
}

double StyleLossEvaluator::evaluate(const ForwardTrace& trace,
                                    std::array<Eigen::MatrixXd, kTapCount>* tap_grads,
                                    LayerLossReport* report) const {
    double total = 0.0;
    if (report) report->layers.clear();

    for (const auto& entry : weighting_.entries) {
        const LayerId layer = entry.layer;
        const int slot = static_cast<int>(layer);
        const int n = layer_info(layer).filters;

        FeatureMap f = trace.feature(layer);
        const int k_in = f.positions;
        const Eigen::MatrixXd g_in = gram(f);

        LayerAggregate agg = layer_min_loss(g_in, k_in, pool_, layer, mode_);
        total += entry.normalized * agg.value;

        if (tap_grads) {
            // d value / d G_in for the aggregated layer loss. Under Min only the
            // chosen exemplar contributes; under Average all do with weight 1/E.
            const double kin = static_cast<double>(k_in);
            Eigen::MatrixXd target;  // pooled exemplar Gram, already K-normalized
            if (mode_ == Aggregation::Min) {
                const GramSet& gs = pool_.grams(*agg.argmin);
                target = gs.g[slot] / static_cast<double>(gs.k[slot]);
            } else {
                target = Eigen::MatrixXd::Zero(n, n);
                for (int i = 0; i < pool_.size(); ++i) {
                    const GramSet& gs = pool_.grams(i);
                    target += gs.g[slot] / static_cast<double>(gs.k[slot]);
                }
                target /= pool_.size();
            }
            // value = (1/(4n^2)) sum_ab (G_in/k - T)^2  =>  dvalue/dG = (G_in/k - T) / (2 n^2 k)
            // and with F stored K×N, d/dF of a symmetric S-weighted Gram is 2 F S.
            const Eigen::MatrixXd s =
                (entry.normalized / (2.0 * n * static_cast<double>(n) * kin)) * (g_in / kin - target);
            (*tap_grads)[slot].noalias() = 2.0 * (f.m * s);
        }

        if (report) {
            LayerLossReport::Layer lr;
            lr.layer = layer;
            lr.per_exemplar = std::move(agg.per_exemplar);
            lr.argmin = agg.argmin;
            lr.value = agg.value;
            lr.weight = entry.normalized;
            report->layers.push_back(std::move(lr));
        }
    }
    if (report) report->total = total;
    return total;
}

double StyleLossEvaluator::total_loss(const PreprocessedTensor& input, LayerLossReport* report) const {
    const ForwardTrace trace = net_.forward(input);
    return evaluate(trace, nullptr, report);
}

double StyleLossEvaluator::total_loss_with_gradient(const PreprocessedTensor& input, Eigen::MatrixXd& grad,
                                                    LayerLossReport* report) const {
    const ForwardTrace trace = net_.forward(input);
    std::array<Eigen::MatrixXd, kTapCount> tap_grads;
    const double total = evaluate(trace, &tap_grads, report);
    grad = net_.input_gradient(trace, tap_grads);
    return total;
}

}  // namespace mesa
