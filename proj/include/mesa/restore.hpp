#pragma once

#include "mesa/exemplar_loss.hpp"
#include "mesa/image.hpp"
#include "mesa/lbfgs.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace mesa {

enum class InitMode { Input, Noise };
InitMode init_mode_from_name(const std::string& name);  // "input" | "noise"
const char* init_mode_name(InitMode m);

struct RestorationConfig {
    int max_iterations = 5000;
    InitMode init = InitMode::Input;
    Aggregation aggregation = Aggregation::Min;
    std::vector<LayerId> layers = {LayerId::Layer1, LayerId::AvgPool1, LayerId::AvgPool2,
                                   LayerId::AvgPool3, LayerId::AvgPool4};
    /// true: composite + gradient masking on every evaluation;
    /// false: composite at initialization and once at the end only.
    bool mask_every_step = true;
    std::uint64_t noise_seed = 1;
    double convergence_tol = 1e-7;
    int log_every = 50;
    int lbfgs_history = 20;
};

struct IterationRecord {
    int iteration = 0;
    double loss = 0.0;
    std::vector<int> argmin;  // chosen exemplar per configured layer (min aggregation)
};

struct RestorationResult {
    ImageTensor output;
    std::vector<double> loss_trace;              // per accepted iteration
    std::vector<std::vector<int>> argmin_trace;  // parallel to loss_trace
    int iterations_run = 0;
    StopReason stop_reason = StopReason::Converged;
    bool no_op = false;  // mask was entirely zero
    double initial_loss = 0.0;
    LayerLossReport final_report;
};

/// Invoked every cfg.log_every accepted iterations and on the final one.
using ProgressFn = std::function<void(const IterationRecord&, const ImageTensor& current)>;

/// The optimization objective of restore(): composite(x) -> preprocess ->
/// weighted multi-exemplar style loss, with the gradient confined to masked,
/// unclamped pixels. Exposed so the gradient can be verified independently.
class MaskedStyleObjective {
  public:
    MaskedStyleObjective(const ImageTensor& damaged, const BinaryMask& mask, const Backbone& net,
                         const ExemplarPool& pool, const LayerWeighting& weighting,
                         const RestorationConfig& cfg);

    /// Pixel-space starting point per cfg.init (planar layout: channel-contiguous).
    Eigen::VectorXd initial_point() const;

    double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad,
                    LayerLossReport* report = nullptr) const;

    /// Composites x over the damaged input (mask semantics, clamped).
    ImageTensor to_image(const Eigen::VectorXd& x) const;

    int pixel_count() const { return hw_; }

  private:
    const ImageTensor& damaged_;
    const BinaryMask& mask_;
    const RestorationConfig& cfg_;
    StyleLossEvaluator evaluator_;
    int hw_;
    mutable PreprocessedTensor pre_;
    mutable Eigen::MatrixXd grad_planes_;
};

/// Rewrites only masked pixels of `damaged` so its per-layer Gram statistics
/// approach the pool's, weighted per layer. Pixels where mask==0 equal the
/// input bit-for-bit in the result.
RestorationResult restore(const ImageTensor& damaged, const BinaryMask& mask, const Backbone& net,
                          const ExemplarPool& pool, const LayerWeighting& weighting,
                          const RestorationConfig& cfg, const ProgressFn& progress = {});

}  // namespace mesa
