#pragma once

#include "mesa/image.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mesa {

/// The five taps whose statistics drive the style loss, in network order.
enum class LayerId : int { Layer1 = 0, AvgPool1 = 1, AvgPool2 = 2, AvgPool3 = 3, AvgPool4 = 4 };

inline constexpr int kTapCount = 5;

struct LayerInfo {
    LayerId id;
    const char* name;
    int filters;          // channel count at the tap
    int receptive_field;  // input-pixel extent influencing one activation
};

const std::array<LayerInfo, kTapCount>& tap_layers();
const LayerInfo& layer_info(LayerId id);
LayerId layer_from_name(const std::string& name);  // throws on unknown name

/// Activations at one tap. Stored as a K×N matrix: column a holds the
/// activations of filter a over the K flattened spatial positions.
struct FeatureMap {
    LayerId layer{};
    int filters = 0;    // N
    int positions = 0;  // K = feature_h * feature_w
    int feature_h = 0;
    int feature_w = 0;
    Eigen::MatrixXd m;  // positions x filters
};

/// G_ab = sum_i F_ai F_bi for one tap: N×N, symmetric, PSD by construction.
Eigen::MatrixXd gram(const FeatureMap& f);

/// Per-tap Gram matrices of one image, plus the spatial size K each used.
struct GramSet {
    std::array<Eigen::MatrixXd, kTapCount> g;
    std::array<int, kTapCount> k{};
};

/// Frozen convolution parameters of the backbone prefix.
struct BackboneParams {
    struct Conv {
        std::string name;
        int in_channels = 0;
        int out_channels = 0;
        Eigen::MatrixXd weight;  // (9*in_channels) x out_channels; row index = c*9 + ky*3 + kx
        Eigen::VectorXd bias;    // out_channels
    };
    std::vector<Conv> convs;  // the 12 convolutions feeding the taps
};

/// Conv layer names/shapes of the prefix, in order.
struct ConvSpec {
    const char* name;
    int in_channels;
    int out_channels;
};
const std::vector<ConvSpec>& conv_specs();

/// Seeded He-initialized parameters. Produces a functional (untrained)
/// backbone whose feature statistics still drive the optimization; real runs
/// should convert pretrained weights (see tools/convert_vgg19_weights.py).
BackboneParams random_backbone_params(std::uint64_t seed);

void save_backbone_params(const BackboneParams& params, const std::string& path);
BackboneParams load_backbone_params(const std::string& path);  // throws, naming the offending tensor

/// Weights path resolution: explicit argument, else MESA_BACKBONE_WEIGHTS,
/// else "mesa-backbone.weights" in the working directory.
std::string default_weights_path();

class Backbone;

/// All per-op activations of one forward pass, kept for backpropagation.
struct ForwardTrace {
    struct PlaneDims {
        int h = 0, w = 0;
    };
    std::vector<Eigen::MatrixXd> act;  // post-op output per op
    std::vector<PlaneDims> dims;       // spatial dims of each op output
    std::array<int, kTapCount> tap_op{};  // op index feeding each tap
    int input_h = 0, input_w = 0;

    FeatureMap feature(LayerId id) const;
    std::map<LayerId, FeatureMap> features() const;
    GramSet grams() const;
};

/// VGG19-topology prefix: 12 stacked 3×3 convolutions (rectified) in four
/// blocks, each block closed by 2×2 stride-2 *average* pooling. Taps: the
/// first rectified convolution and the four pool outputs. Weights are frozen.
class Backbone {
  public:
    explicit Backbone(BackboneParams params);
    static Backbone load(const std::string& path) { return Backbone(load_backbone_params(path)); }

    /// Forward pass keeping all activations. Throws if a pool output would be empty.
    ForwardTrace forward(const PreprocessedTensor& x) const;

    /// Convenience: taps only.
    std::map<LayerId, FeatureMap> extract_features(const PreprocessedTensor& x) const {
        return forward(x).features();
    }

    /// Backpropagates tap gradients (d loss / d FeatureMap.m, same K×N shape;
    /// empty matrix = zero) to the preprocessed input planes. Returns (H·W)×3.
    Eigen::MatrixXd input_gradient(const ForwardTrace& trace,
                                   const std::array<Eigen::MatrixXd, kTapCount>& tap_grads) const;

    /// FNV-1a over all parameter bytes; invariant across a restoration run.
    std::uint64_t params_checksum() const;

    const BackboneParams& params() const { return params_; }

  private:
    struct Op {
        enum class Kind { Conv, Pool } kind;
        int conv = -1;  // index into params_.convs
        int tap = -1;   // tap slot fed by this op, or -1
    };

    BackboneParams params_;
    std::vector<Op> ops_;
};

}  // namespace mesa
