#include "mesa/backbone.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <random>

namespace mesa {

namespace {

// Workspace cap for the unrolled-patch buffer (doubles), keeps memory bounded
// for large inputs by tiling the spatial dimension.
constexpr std::ptrdiff_t kMaxTileDoubles = 4 << 20;

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv1a(std::uint64_t& h, const void* bytes, size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
}

// Gathers 3×3 neighborhoods (zero-padded) of output rows [r0, r0+n) into
// col: one column per (channel, ky, kx), matching the weight row layout.
void im2col_rows(const Eigen::MatrixXd& x, int h, int w, int r0, int n, Eigen::MatrixXd& col) {
    for (int c = 0; c < x.cols(); ++c) {
        const double* src = x.col(c).data();
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                double* dst = col.col(c * 9 + ky * 3 + kx).data();
                int r = r0;
                int left = n;
                while (left > 0) {
                    const int y = r / w;
                    const int x0 = r % w;
                    const int run = std::min(left, w - x0);
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) {
                        std::fill(dst, dst + run, 0.0);
                    } else {
                        const int sx0 = x0 + kx - 1;
                        const int i0 = std::max(0, -sx0);          // first in-bounds element
                        const int i1 = std::min(run, w - sx0);     // one past last in-bounds
                        std::fill(dst, dst + std::max(0, i0), 0.0);
                        if (i1 > i0)
                            std::memcpy(dst + i0, src + static_cast<std::ptrdiff_t>(sy) * w + sx0 + i0,
                                        static_cast<size_t>(i1 - i0) * sizeof(double));
                        std::fill(dst + std::max(i0, i1), dst + run, 0.0);
                    }
                    dst += run;
                    r += run;
                    left -= run;
                }
            }
        }
    }
}

// Scatter-adds patch gradients back onto the input planes; adjoint of im2col_rows.
void col2im_rows(const Eigen::MatrixXd& col, int h, int w, int r0, int n, Eigen::MatrixXd& dx) {
    for (int c = 0; c < dx.cols(); ++c) {
        double* dst = dx.col(c).data();
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const double* src = col.col(c * 9 + ky * 3 + kx).data();
                int r = r0;
                int left = n;
                while (left > 0) {
                    const int y = r / w;
                    const int x0 = r % w;
                    const int run = std::min(left, w - x0);
                    const int sy = y + ky - 1;
                    if (sy >= 0 && sy < h) {
                        const int sx0 = x0 + kx - 1;
                        const int i0 = std::max(0, -sx0);
                        const int i1 = std::min(run, w - sx0);
                        double* d = dst + static_cast<std::ptrdiff_t>(sy) * w + sx0;
                        for (int i = i0; i < i1; ++i) d[i] += src[i];
                    }
                    src += run;
                    r += run;
                    left -= run;
                }
            }
        }
    }
}

int tile_rows_for(int hw, int in_channels) {
    const std::ptrdiff_t per_row = 9 * static_cast<std::ptrdiff_t>(in_channels);
    return static_cast<int>(std::min<std::ptrdiff_t>(hw, std::max<std::ptrdiff_t>(1, kMaxTileDoubles / per_row)));
}

Eigen::MatrixXd conv3x3_relu(const Eigen::MatrixXd& x, int h, int w, const BackboneParams::Conv& cv) {
    const int hw = h * w;
    Eigen::MatrixXd y(hw, cv.out_channels);
    const int tile = tile_rows_for(hw, cv.in_channels);
    Eigen::MatrixXd col(tile, 9 * cv.in_channels);
    for (int r0 = 0; r0 < hw; r0 += tile) {
        const int rows = std::min(tile, hw - r0);
        im2col_rows(x, h, w, r0, rows, col);
        y.middleRows(r0, rows).noalias() = col.topRows(rows) * cv.weight;
    }
    y.rowwise() += cv.bias.transpose();
    y = y.cwiseMax(0.0);
    return y;
}

// d loss / d x for a rectified convolution; g must already be masked by the
// rectifier (zeroed where the stored output is zero).
Eigen::MatrixXd conv3x3_backward(const Eigen::MatrixXd& g, int h, int w, const BackboneParams::Conv& cv) {
    const int hw = h * w;
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(hw, cv.in_channels);
    const int tile = tile_rows_for(hw, cv.in_channels);
    Eigen::MatrixXd col(tile, 9 * cv.in_channels);
    for (int r0 = 0; r0 < hw; r0 += tile) {
        const int rows = std::min(tile, hw - r0);
        col.topRows(rows).noalias() = g.middleRows(r0, rows) * cv.weight.transpose();
        col2im_rows(col, h, w, r0, rows, dx);
    }
    return dx;
}

Eigen::MatrixXd avgpool2(const Eigen::MatrixXd& x, int h, int w, int& oh, int& ow) {
    oh = h / 2;  // floor: odd trailing row/column is dropped
    ow = w / 2;
    Eigen::MatrixXd y(static_cast<std::ptrdiff_t>(oh) * ow, x.cols());
    for (int c = 0; c < x.cols(); ++c) {
        const double* src = x.col(c).data();
        double* dst = y.col(c).data();
        for (int oy = 0; oy < oh; ++oy) {
            const double* r0 = src + static_cast<std::ptrdiff_t>(2 * oy) * w;
            const double* r1 = r0 + w;
            for (int ox = 0; ox < ow; ++ox)
                dst[static_cast<std::ptrdiff_t>(oy) * ow + ox] =
                    0.25 * (r0[2 * ox] + r0[2 * ox + 1] + r1[2 * ox] + r1[2 * ox + 1]);
        }
    }
    return y;
}

Eigen::MatrixXd avgpool2_backward(const Eigen::MatrixXd& g, int in_h, int in_w) {
    const int oh = in_h / 2, ow = in_w / 2;
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(static_cast<std::ptrdiff_t>(in_h) * in_w, g.cols());
    for (int c = 0; c < g.cols(); ++c) {
        const double* src = g.col(c).data();
        double* dst = dx.col(c).data();
        for (int oy = 0; oy < oh; ++oy) {
            double* r0 = dst + static_cast<std::ptrdiff_t>(2 * oy) * in_w;
            double* r1 = r0 + in_w;
            for (int ox = 0; ox < ow; ++ox) {
                const double v = 0.25 * src[static_cast<std::ptrdiff_t>(oy) * ow + ox];
                r0[2 * ox] += v;
                r0[2 * ox + 1] += v;
                r1[2 * ox] += v;
                r1[2 * ox + 1] += v;
            }
        }
    }
    return dx;
}

}  // namespace

const std::array<LayerInfo, kTapCount>& tap_layers() {
    // Receptive fields from the 3x3-conv / 2x2-stride-2 recurrence; the
    // deepest tap is bookkept with its post-pool jump (116 + 16). Only the
    // interval edges up to AvgPool3 enter the rf-partition weights, the last
    // interval being open-ended.
    static const std::array<LayerInfo, kTapCount> table = {{
        {LayerId::Layer1, "layer1", 64, 3},
        {LayerId::AvgPool1, "AvgPool1", 64, 6},
        {LayerId::AvgPool2, "AvgPool2", 128, 16},
        {LayerId::AvgPool3, "AvgPool3", 256, 52},
        {LayerId::AvgPool4, "AvgPool4", 512, 132},
    }};
    return table;
}

const LayerInfo& layer_info(LayerId id) { return tap_layers()[static_cast<int>(id)]; }

LayerId layer_from_name(const std::string& name) {
    for (const auto& li : tap_layers())
        if (name == li.name) return li.id;
    throw std::invalid_argument("unknown layer name: " + name);
}

const std::vector<ConvSpec>& conv_specs() {
    static const std::vector<ConvSpec> specs = {
        {"conv1_1", 3, 64},    {"conv1_2", 64, 64},
        {"conv2_1", 64, 128},  {"conv2_2", 128, 128},
        {"conv3_1", 128, 256}, {"conv3_2", 256, 256}, {"conv3_3", 256, 256}, {"conv3_4", 256, 256},
        {"conv4_1", 256, 512}, {"conv4_2", 512, 512}, {"conv4_3", 512, 512}, {"conv4_4", 512, 512},
    };
    return specs;
}

Eigen::MatrixXd gram(const FeatureMap& f) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(f.filters, f.filters);
    g.selfadjointView<Eigen::Lower>().rankUpdate(f.m.transpose());
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose().triangularView<Eigen::StrictlyUpper>();
    return g;
}

BackboneParams random_backbone_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    BackboneParams p;
    for (const auto& spec : conv_specs()) {
        BackboneParams::Conv cv;
        cv.name = spec.name;
        cv.in_channels = spec.in_channels;
        cv.out_channels = spec.out_channels;
        const double stddev = std::sqrt(2.0 / (9.0 * spec.in_channels));
        std::normal_distribution<double> dist(0.0, stddev);
        cv.weight.resize(9 * spec.in_channels, spec.out_channels);
        for (int o = 0; o < spec.out_channels; ++o)
            for (int r = 0; r < cv.weight.rows(); ++r) cv.weight(r, o) = dist(rng);
        cv.bias = Eigen::VectorXd::Zero(spec.out_channels);
        p.convs.push_back(std::move(cv));
    }
    return p;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

constexpr char kMagic[8] = {'M', 'E', 'S', 'A', 'W', 'G', 'T', '1'};

void write_all(std::FILE* f, const void* p, size_t n, const std::string& path) {
    if (std::fwrite(p, 1, n, f) != n) throw std::runtime_error("cannot write weights file: " + path);
}

void read_all(std::FILE* f, void* p, size_t n, const std::string& what) {
    if (std::fread(p, 1, n, f) != n)
        throw std::runtime_error("weights file truncated while reading " + what);
}

void write_tensor_header(std::FILE* f, const std::string& name, std::uint8_t dtype,
                         const std::vector<std::uint32_t>& dims, const std::string& path) {
    const auto len = static_cast<std::uint16_t>(name.size());
    write_all(f, &len, sizeof(len), path);
    write_all(f, name.data(), name.size(), path);
    write_all(f, &dtype, 1, path);
    const auto ndim = static_cast<std::uint8_t>(dims.size());
    write_all(f, &ndim, 1, path);
    for (std::uint32_t d : dims) write_all(f, &d, sizeof(d), path);
}

}  // namespace

void save_backbone_params(const BackboneParams& params, const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot open weights file for writing: " + path);
    write_all(f.get(), kMagic, sizeof(kMagic), path);
    const std::uint32_t count = static_cast<std::uint32_t>(params.convs.size()) * 2;
    write_all(f.get(), &count, sizeof(count), path);
    std::vector<double> buf;
    for (const auto& cv : params.convs) {
        const auto out = static_cast<std::uint32_t>(cv.out_channels);
        const auto in = static_cast<std::uint32_t>(cv.in_channels);
        // weight serialized in [out, in, 3, 3] row-major order
        write_tensor_header(f.get(), cv.name + ".weight", 2, {out, in, 3, 3}, path);
        buf.resize(static_cast<size_t>(out) * in * 9);
        for (std::uint32_t o = 0; o < out; ++o)
            for (std::uint32_t c = 0; c < in; ++c)
                for (int j = 0; j < 9; ++j)
                    buf[(static_cast<size_t>(o) * in + c) * 9 + j] = cv.weight(c * 9 + j, o);
        write_all(f.get(), buf.data(), buf.size() * sizeof(double), path);
        write_tensor_header(f.get(), cv.name + ".bias", 2, {out}, path);
        write_all(f.get(), cv.bias.data(), out * sizeof(double), path);
    }
}

BackboneParams load_backbone_params(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw std::runtime_error("weights file not found: " + path);
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open weights file: " + path);

    char magic[8];
    read_all(f.get(), magic, sizeof(magic), "header");
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a backbone weights file: " + path);
    std::uint32_t count = 0;
    read_all(f.get(), &count, sizeof(count), "header");

    BackboneParams p;
    for (const auto& spec : conv_specs()) {
        BackboneParams::Conv cv;
        cv.name = spec.name;
        cv.in_channels = spec.in_channels;
        cv.out_channels = spec.out_channels;
        cv.weight.resize(9 * spec.in_channels, spec.out_channels);
        cv.bias.resize(spec.out_channels);
        p.convs.push_back(std::move(cv));
    }

    auto read_payload = [&](const std::string& name, size_t n, std::uint8_t dtype) {
        std::vector<double> out(n);
        if (dtype == 2) {
            read_all(f.get(), out.data(), n * sizeof(double), "tensor " + name);
        } else if (dtype == 1) {
            std::vector<float> tmp(n);
            read_all(f.get(), tmp.data(), n * sizeof(float), "tensor " + name);
            for (size_t i = 0; i < n; ++i) out[i] = tmp[i];
        } else {
            throw std::runtime_error("tensor " + name + ": unsupported dtype");
        }
        return out;
    };

    std::map<std::string, bool> seen;
    for (std::uint32_t t = 0; t < count; ++t) {
        std::uint16_t name_len = 0;
        read_all(f.get(), &name_len, sizeof(name_len), "tensor header");
        std::string name(name_len, '\0');
        read_all(f.get(), name.data(), name_len, "tensor header");
        std::uint8_t dtype = 0, ndim = 0;
        read_all(f.get(), &dtype, 1, "tensor " + name);
        read_all(f.get(), &ndim, 1, "tensor " + name);
        std::vector<std::uint32_t> dims(ndim);
        for (auto& d : dims) read_all(f.get(), &d, sizeof(d), "tensor " + name);

        const auto dot = name.rfind('.');
        const std::string base = dot == std::string::npos ? name : name.substr(0, dot);
        const std::string field = dot == std::string::npos ? "" : name.substr(dot + 1);
        BackboneParams::Conv* cv = nullptr;
        for (auto& c : p.convs)
            if (c.name == base) cv = &c;
        if (!cv || (field != "weight" && field != "bias"))
            throw std::runtime_error("unexpected tensor " + name + " in " + path);

        if (field == "weight") {
            const std::vector<std::uint32_t> want = {static_cast<std::uint32_t>(cv->out_channels),
                                                     static_cast<std::uint32_t>(cv->in_channels), 3, 3};
            if (dims != want)
                throw std::runtime_error("tensor " + name + ": shape mismatch");
            const auto raw = read_payload(name, static_cast<size_t>(cv->out_channels) * cv->in_channels * 9, dtype);
            for (int o = 0; o < cv->out_channels; ++o)
                for (int c = 0; c < cv->in_channels; ++c)
                    for (int j = 0; j < 9; ++j)
                        cv->weight(c * 9 + j, o) = raw[(static_cast<size_t>(o) * cv->in_channels + c) * 9 + j];
        } else {
            if (dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(cv->out_channels)})
                throw std::runtime_error("tensor " + name + ": shape mismatch");
            const auto raw = read_payload(name, cv->out_channels, dtype);
            for (int o = 0; o < cv->out_channels; ++o) cv->bias(o) = raw[o];
        }
        seen[name] = true;
    }
    for (const auto& spec : conv_specs())
        for (const char* field : {".weight", ".bias"})
            if (!seen.count(spec.name + std::string(field)))
                throw std::runtime_error(std::string("missing tensor ") + spec.name + field + " in " + path);
    return p;
}

std::string default_weights_path() {
    if (const char* env = std::getenv("MESA_BACKBONE_WEIGHTS"); env && *env) return env;
    return "mesa-backbone.weights";
}

Backbone::Backbone(BackboneParams params) : params_(std::move(params)) {
    if (params_.convs.size() != conv_specs().size())
        throw std::invalid_argument("Backbone: wrong number of convolutions");
    for (size_t i = 0; i < params_.convs.size(); ++i) {
        const auto& cv = params_.convs[i];
        const auto& spec = conv_specs()[i];
        if (cv.in_channels != spec.in_channels || cv.out_channels != spec.out_channels ||
            cv.weight.rows() != 9 * spec.in_channels || cv.weight.cols() != spec.out_channels ||
            cv.bias.size() != spec.out_channels)
            throw std::invalid_argument(std::string("Backbone: shape mismatch in ") + spec.name);
    }
    // conv indices per block: {0,1} {2,3} {4..7} {8..11}; taps at conv0 and each pool
    ops_ = {
        {Op::Kind::Conv, 0, 0},  {Op::Kind::Conv, 1, -1},  {Op::Kind::Pool, -1, 1},
        {Op::Kind::Conv, 2, -1}, {Op::Kind::Conv, 3, -1},  {Op::Kind::Pool, -1, 2},
        {Op::Kind::Conv, 4, -1}, {Op::Kind::Conv, 5, -1},  {Op::Kind::Conv, 6, -1},
        {Op::Kind::Conv, 7, -1}, {Op::Kind::Pool, -1, 3},
        {Op::Kind::Conv, 8, -1}, {Op::Kind::Conv, 9, -1},  {Op::Kind::Conv, 10, -1},
        {Op::Kind::Conv, 11, -1}, {Op::Kind::Pool, -1, 4},
    };
}

ForwardTrace Backbone::forward(const PreprocessedTensor& x) const {
    if (x.height / 16 == 0 || x.width / 16 == 0)
        throw std::invalid_argument("Backbone: input too small, last pool output would be empty");
    if (x.planes.rows() != static_cast<std::ptrdiff_t>(x.height) * x.width || x.planes.cols() != 3)
        throw std::invalid_argument("Backbone: malformed input planes");

    ForwardTrace tr;
    tr.input_h = x.height;
    tr.input_w = x.width;
    tr.act.reserve(ops_.size());
    tr.dims.reserve(ops_.size());

    const Eigen::MatrixXd* cur = &x.planes;
    int h = x.height, w = x.width;
    for (size_t i = 0; i < ops_.size(); ++i) {
        const Op& op = ops_[i];
        if (op.kind == Op::Kind::Conv) {
            tr.act.push_back(conv3x3_relu(*cur, h, w, params_.convs[op.conv]));
        } else {
            int oh = 0, ow = 0;
            tr.act.push_back(avgpool2(*cur, h, w, oh, ow));
            h = oh;
            w = ow;
        }
        tr.dims.push_back({h, w});
        if (op.tap >= 0) tr.tap_op[op.tap] = static_cast<int>(i);
        cur = &tr.act.back();
    }
    return tr;
}

FeatureMap ForwardTrace::feature(LayerId id) const {
    const int slot = static_cast<int>(id);
    const int op = tap_op[slot];
    FeatureMap f;
    f.layer = id;
    f.filters = static_cast<int>(act[op].cols());
    f.feature_h = dims[op].h;
    f.feature_w = dims[op].w;
    f.positions = f.feature_h * f.feature_w;
    f.m = act[op];
    return f;
}

std::map<LayerId, FeatureMap> ForwardTrace::features() const {
    std::map<LayerId, FeatureMap> out;
    for (const auto& li : tap_layers()) out.emplace(li.id, feature(li.id));
    return out;
}

GramSet ForwardTrace::grams() const {
    GramSet gs;
    for (const auto& li : tap_layers()) {
        const int slot = static_cast<int>(li.id);
        FeatureMap f = feature(li.id);
        gs.g[slot] = gram(f);
        gs.k[slot] = f.positions;
    }
    return gs;
}

Eigen::MatrixXd Backbone::input_gradient(const ForwardTrace& trace,
                                         const std::array<Eigen::MatrixXd, kTapCount>& tap_grads) const {
    Eigen::MatrixXd g;  // gradient at the output of the op being visited
    for (int i = static_cast<int>(ops_.size()) - 1; i >= 0; --i) {
        const Op& op = ops_[i];
        const Eigen::MatrixXd& out = trace.act[i];
        if (g.size() == 0) g = Eigen::MatrixXd::Zero(out.rows(), out.cols());
        if (op.tap >= 0 && tap_grads[op.tap].size() != 0) {
            if (tap_grads[op.tap].rows() != out.rows() || tap_grads[op.tap].cols() != out.cols())
                throw std::invalid_argument("input_gradient: tap gradient shape mismatch");
            g += tap_grads[op.tap];
        }
        const int in_h = i == 0 ? trace.input_h : trace.dims[i - 1].h;
        const int in_w = i == 0 ? trace.input_w : trace.dims[i - 1].w;
        if (op.kind == Op::Kind::Conv) {
            g.array() *= (out.array() > 0.0).cast<double>();  // rectifier mask
            g = conv3x3_backward(g, in_h, in_w, params_.convs[op.conv]);
        } else {
            g = avgpool2_backward(g, in_h, in_w);
        }
    }
    return g;
}

std::uint64_t Backbone::params_checksum() const {
    std::uint64_t h = kFnvOffset;
    for (const auto& cv : params_.convs) {
        fnv1a(h, cv.weight.data(), sizeof(double) * cv.weight.size());
        fnv1a(h, cv.bias.data(), sizeof(double) * cv.bias.size());
    }
    return h;
}

}  // namespace mesa
