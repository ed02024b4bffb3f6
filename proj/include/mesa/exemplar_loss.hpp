#pragma once

#include "mesa/backbone.hpp"
#include "mesa/char_weights_types.hpp"
#include "mesa/image.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <vector>

namespace mesa {

enum class Aggregation { Min, Average };

Aggregation aggregation_from_name(const std::string& name);  // "min" | "avg"/"average"
const char* aggregation_name(Aggregation a);

/// Immutable set of exemplar images with their per-tap Gram statistics
/// computed once up front. Exemplars may have arbitrary, differing sizes.
class ExemplarPool {
  public:
    static ExemplarPool build(const Backbone& net, std::vector<ImageTensor> exemplars);

    int size() const { return static_cast<int>(grams_.size()); }
    const GramSet& grams(int i) const { return grams_.at(i); }
    const ImageTensor& exemplar(int i) const { return exemplars_.at(i); }
    const std::vector<ImageTensor>& exemplars() const { return exemplars_; }

  private:
    std::vector<ImageTensor> exemplars_;
    std::vector<GramSet> grams_;
};

/// Full per-layer breakdown of one loss evaluation.
struct LayerLossReport {
    struct Layer {
        LayerId layer{};
        std::vector<double> per_exemplar;   // length E
        std::optional<int> argmin;          // lowest index on ties; empty under Average
        double value = 0.0;                 // aggregated layer loss
        double weight = 0.0;                // normalized layer weight applied
    };
    std::vector<Layer> layers;
    double total = 0.0;

    nlohmann::json to_json() const;
};

/// Normalized squared Gram difference between one input/exemplar pair at one
/// tap: (1/(4 n^2)) * sum_ab (g_in/k_in - g_ex/k_ex)^2. Each Gram is
/// normalized by its own spatial size, so inputs and exemplars of different
/// resolutions compare directly; with k_in == k_ex this is the plain
/// 1/(4 n^2 k^2) * sum (G_in - G_ex)^2.
double exemplar_layer_loss(const Eigen::MatrixXd& g_in, int k_in, const Eigen::MatrixXd& g_ex,
                           int k_ex, int filters);

/// Aggregated loss at one tap over the whole pool.
struct LayerAggregate {
    double value = 0.0;
    std::optional<int> argmin;
    std::vector<double> per_exemplar;
};
LayerAggregate layer_min_loss(const Eigen::MatrixXd& input_gram, int input_k, const ExemplarPool& pool,
                              LayerId layer, Aggregation mode);

/// Evaluates the weighted multi-exemplar style loss of one image, and
/// optionally its gradient with respect to the preprocessed input planes.
class StyleLossEvaluator {
  public:
    StyleLossEvaluator(const Backbone& net, const ExemplarPool& pool, LayerWeighting weighting,
                       Aggregation mode);

    double total_loss(const PreprocessedTensor& input, LayerLossReport* report = nullptr) const;

    /// grad receives d total / d planes, shaped like input.planes.
    double total_loss_with_gradient(const PreprocessedTensor& input, Eigen::MatrixXd& grad,
                                    LayerLossReport* report = nullptr) const;

    const LayerWeighting& weighting() const { return weighting_; }
    Aggregation mode() const { return mode_; }

  private:
    double evaluate(const ForwardTrace& trace, std::array<Eigen::MatrixXd, kTapCount>* tap_grads,
                    LayerLossReport* report) const;

    const Backbone& net_;
    const ExemplarPool& pool_;
    LayerWeighting weighting_;
    Aggregation mode_;
};

}  // namespace mesa
