#include "mesa/cli.hpp"

#include "mesa/char_weights.hpp"
#include "mesa/damage.hpp"
#include "mesa/image_io.hpp"
#include "mesa/image_metrics.hpp"
#include "mesa/plot.hpp"
#include "mesa/restore.hpp"
#include "mesa/run_manifest.hpp"
#include "mesa/text_metrics.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>

namespace mesa {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

/// Input problems detected after flag parsing; mapped to exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<LayerId> parse_layer_csv(const std::string& csv) {
    std::vector<LayerId> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(layer_from_name(tok));
    }
    if (out.empty()) throw ValidationError("--layers: no layers given");
    for (size_t i = 1; i < out.size(); ++i)
        if (static_cast<int>(out[i]) <= static_cast<int>(out[i - 1]))
            throw ValidationError("--layers: layers must be distinct and in network order");
    return out;
}

std::string layers_csv(const std::vector<LayerId>& layers) {
    std::string out;
    for (size_t i = 0; i < layers.size(); ++i) {
        if (i) out += ',';
        out += layer_info(layers[i]).name;
    }
    return out;
}

std::vector<fs::path> list_images(const std::string& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) throw ValidationError("not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".PNG") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

Backbone load_backbone_checked(const std::string& flag_path) {
    const std::string path = flag_path.empty() ? default_weights_path() : flag_path;
    if (!fs::exists(path))
        throw ValidationError("backbone weights not found at '" + path +
                              "' (set --backbone or MESA_BACKBONE_WEIGHTS; see README)");
    return Backbone::load(path);
}

BoxTable load_boxes(const std::string& path, const std::string& format) {
    if (!fs::exists(path)) throw ValidationError("--boxes: file not found: " + path);
    if (format == "mesa") return parse_box_table(path);
    if (format == "tesseract") return parse_tesseract_tsv(path);
    throw ValidationError("--boxes-format must be 'mesa' or 'tesseract'");
}

/// Box-table fitting with the documented small-sample fallback.
LayerWeighting weights_from_boxes(const BoxTable& boxes, const std::vector<LayerId>& layers,
                                  WeightScheme scheme, WidthDistribution* dist_out,
                                  LetterWidthSample* sample_out) {
    LetterWidthSample sample = extract_letter_widths(boxes);
    if (sample_out) *sample_out = sample;
    if (static_cast<int>(sample.widths.size()) < kMinFitSample) {
        std::cerr << "warning: only " << sample.widths.size()
                  << " letter widths; falling back to uniform layer weights\n";
        if (dist_out) *dist_out = WidthDistribution{};
        return LayerWeighting::uniform(layers);
    }
    const WidthDistribution dist = fit_distribution(sample);
    if (dist_out) *dist_out = dist;
    return derive_weights(dist, layers, scheme);
}

std::string json_number(double v) {
    if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
    return json(v).dump();  // shortest representation that round-trips
}

void write_json_file(const std::string& path, const ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

std::string trimmed_file_text(const std::string& path) {
    if (!fs::exists(path)) throw ValidationError("file not found: " + path);
    std::string s = read_text_file(path);
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

// ---------------------------------------------------------------- restore

struct RestoreArgs {
    std::string input, mask, exemplars, out = "mesa-out", backbone;
    std::string layers = "layer1,AvgPool1,AvgPool2,AvgPool3,AvgPool4";
    std::string agg = "min", init = "input";
    std::string weights_scheme = "rf-partition", weights_file, boxes, boxes_format = "mesa";
    int max_iters = 5000;
    int log_every = 50;
    double mask_threshold = 0.5;
    double tol = 1e-7;
    std::uint64_t seed = 1;
    bool save_progress = false;
    bool mask_static = false;  // composite at initialization only
};

int cmd_restore(const RestoreArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!fs::exists(a.input)) throw ValidationError("--input: file not found: " + a.input);
    if (!fs::exists(a.mask)) throw ValidationError("--mask: file not found: " + a.mask);

    RestorationConfig cfg;
    cfg.max_iterations = a.max_iters;
    cfg.init = init_mode_from_name(a.init);
    cfg.aggregation = aggregation_from_name(a.agg);
    cfg.layers = parse_layer_csv(a.layers);
    cfg.mask_every_step = !a.mask_static;
    cfg.noise_seed = a.seed;
    cfg.convergence_tol = a.tol;
    cfg.log_every = a.log_every;

    const ImageTensor damaged = load_image(a.input);
    const BinaryMask mask = load_mask(a.mask, a.mask_threshold);
    if (mask.height != damaged.height || mask.width != damaged.width)
        throw ValidationError("--mask: dimensions do not match --input");

    const auto exemplar_paths = list_images(a.exemplars);
    if (exemplar_paths.empty()) throw ValidationError("--exemplars: no images in " + a.exemplars);

    const Backbone net = load_backbone_checked(a.backbone);
    const std::uint64_t pre_checksum = net.params_checksum();

    std::vector<ImageTensor> exemplar_images;
    exemplar_images.reserve(exemplar_paths.size());
    for (const auto& p : exemplar_paths) exemplar_images.push_back(load_image(p.string()));
    const ExemplarPool pool = ExemplarPool::build(net, std::move(exemplar_images));

    LayerWeighting weighting;
    WidthDistribution dist;
    ordered_json weights_meta;
    if (!a.weights_file.empty()) {
        if (!fs::exists(a.weights_file)) throw ValidationError("--weights-file: not found: " + a.weights_file);
        json doc;
        try {
            doc = json::parse(read_text_file(a.weights_file));
            parse_weights_report(doc, weighting, dist);
        } catch (const std::exception& e) {
            throw ValidationError(std::string("--weights-file: ") + e.what());
        }
        {
            auto have = weighting.layers();
            auto want = cfg.layers;
            std::sort(have.begin(), have.end());
            std::sort(want.begin(), want.end());
            if (have != want) throw ValidationError("--weights-file: layers do not match --layers");
        }
        weights_meta["source"] = "file";
        weights_meta["path"] = a.weights_file;
    } else if (!a.boxes.empty()) {
        const BoxTable boxes = load_boxes(a.boxes, a.boxes_format);
        weighting = weights_from_boxes(boxes, cfg.layers, scheme_from_name(a.weights_scheme), &dist, nullptr);
        weights_meta["source"] = "boxes";
        weights_meta["path"] = a.boxes;
        weights_meta["scheme"] = a.weights_scheme;
    } else {
        std::cerr << "warning: no --weights-file or --boxes given; using uniform layer weights\n";
        weighting = LayerWeighting::uniform(cfg.layers);
        weights_meta["source"] = "uniform";
    }

    fs::create_directories(a.out);
    if (a.save_progress) fs::create_directories(fs::path(a.out) / "checkpoints");

    ProgressFn progress = [&](const IterationRecord& rec, const ImageTensor& current) {
        std::cout << "iter " << rec.iteration << " loss " << rec.loss << " argmin [";
        for (size_t i = 0; i < rec.argmin.size(); ++i) std::cout << (i ? "," : "") << rec.argmin[i];
        std::cout << "]\n";
        if (a.save_progress) {
            char name[48];
            std::snprintf(name, sizeof(name), "checkpoints/iter_%06d.png", rec.iteration);
            save_image(current, (fs::path(a.out) / name).string());
        }
    };

    const RestorationResult res = restore(damaged, mask, net, pool, weighting, cfg, progress);

    const auto out_png = fs::path(a.out) / "restored.png";
    save_image(res.output, out_png.string());

    {
        std::ofstream trace(fs::path(a.out) / "loss_trace.jsonl");
        for (size_t i = 0; i < res.loss_trace.size(); ++i) {
            ordered_json line;
            line["iter"] = i + 1;
            line["loss"] = res.loss_trace[i];
            line["argmin"] = res.argmin_trace[i];
            trace << line.dump() << '\n';
        }
    }

    ordered_json manifest;
    manifest["command"] = "restore";
    manifest["config"] = {{"max_iterations", cfg.max_iterations},
                          {"init", init_mode_name(cfg.init)},
                          {"aggregation", aggregation_name(cfg.aggregation)},
                          {"layers", layers_csv(cfg.layers)},
                          {"mask_every_step", cfg.mask_every_step},
                          {"noise_seed", cfg.noise_seed},
                          {"convergence_tol", cfg.convergence_tol},
                          {"log_every", cfg.log_every}};
    manifest["input"] = {{"path", fs::absolute(a.input).string()}, {"hash", file_content_hash(a.input)}};
    manifest["mask"] = {{"path", fs::absolute(a.mask).string()},
                        {"hash", file_content_hash(a.mask)},
                        {"threshold", a.mask_threshold}};
    manifest["exemplars"] = ordered_json::array();
    for (const auto& p : exemplar_paths)
        manifest["exemplars"].push_back(
            {{"path", fs::absolute(p).string()}, {"hash", file_content_hash(p.string())}});
    manifest["backbone"] = {{"path", a.backbone.empty() ? default_weights_path() : a.backbone},
                            {"params_checksum", net.params_checksum()}};
    manifest["weights"] = weights_meta;
    manifest["weights"]["normalized"] = weighting.to_json();
    manifest["result"] = {{"iterations_run", res.iterations_run},
                          {"stop_reason", stop_reason_name(res.stop_reason)},
                          {"no_op", res.no_op},
                          {"initial_loss", res.initial_loss},
                          {"final_loss", res.loss_trace.empty() ? res.initial_loss : res.loss_trace.back()},
                          {"output", "restored.png"}};
    write_json_file((fs::path(a.out) / "manifest.json").string(), manifest);

    if (net.params_checksum() != pre_checksum)
        throw std::runtime_error("backbone parameters changed during the run");

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json_file((fs::path(a.out) / "timings.json").string(), ordered_json{{"wall_seconds", wall}});

    std::cout << "wrote " << out_png.string() << " (" << res.iterations_run
              << " iterations, stop: " << stop_reason_name(res.stop_reason) << ")\n";
    return 0;
}

// ---------------------------------------------------------------- weights

struct WeightsArgs {
    std::string boxes, boxes_format = "mesa", scheme = "rf-partition";
    std::string layers = "layer1,AvgPool1,AvgPool2,AvgPool3,AvgPool4";
    std::string out = "mesa-weights";
};

int cmd_weights(const WeightsArgs& a) {
    const auto layers = parse_layer_csv(a.layers);
    const BoxTable boxes = load_boxes(a.boxes, a.boxes_format);
    WidthDistribution dist;
    LetterWidthSample sample;
    const LayerWeighting weighting =
        weights_from_boxes(boxes, layers, scheme_from_name(a.scheme), &dist, &sample);

    fs::create_directories(a.out);
    const auto plot_path = (fs::path(a.out) / "width_distribution.png").string();
    ordered_json report = weights_report(weighting, dist, &sample, plot_path);
    report["scheme"] = a.scheme;
    if (boxes.skipped_rows > 0) report["skipped_rows"] = boxes.skipped_rows;
    write_json_file((fs::path(a.out) / "weights.json").string(), report);
    std::cout << "wrote " << (fs::path(a.out) / "weights.json").string() << '\n';
    return 0;
}

// ---------------------------------------------------------------- eval-text / eval-image

int cmd_eval_text(const std::string& original, const std::string& recovered, long long s, bool normalize) {
    if (s < 1) throw ValidationError("--s must be >= 1");
    const MetricScore score =
        score_text_pair(trimmed_file_text(original), trimmed_file_text(recovered), s, normalize);
    ordered_json j;
    j["ld"] = score.ld;
    j["trs"] = score.trs;
    j["lls"] = score.lls;
    j["s"] = score.s_cap;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_eval_image(const std::string& ref, const std::string& test, const std::string& perceptual) {
    if (!fs::exists(ref)) throw ValidationError("--ref: file not found: " + ref);
    if (!fs::exists(test)) throw ValidationError("--test: file not found: " + test);
    const ImageTensor a = load_image(ref);
    const ImageTensor b = load_image(test);
    if (a.height != b.height || a.width != b.width)
        throw ValidationError("--ref and --test dimensions differ");
    const ImagePairScore s = score_image_pair(a, b, perceptual);
    std::cout << "{\n  \"psnr\": " << json_number(s.psnr) << ",\n  \"ssim\": " << json_number(s.ssim);
    if (s.perceptual.value)
        std::cout << ",\n  \"perceptual\": " << json_number(*s.perceptual.value) << ",\n  \"perceptual_backbone\": "
                  << json(s.perceptual.backbone_tag).dump();
    else
        std::cout << ",\n  \"perceptual_reason\": " << json(s.perceptual.reason).dump();
    std::cout << "\n}\n";
    return 0;
}

// ---------------------------------------------------------------- eval (batch)

struct EvalPair {
    std::string id, ref, test, ref_text, test_text;
};

struct EvalArgs {
    std::string manifest, refs, tests, ref_texts, test_texts;
    std::string out = "mesa-eval";
    long long s = 100;
    bool normalize = false;
};

std::vector<EvalPair> collect_pairs(const EvalArgs& a) {
    std::vector<EvalPair> pairs;
    if (!a.manifest.empty()) {
        if (!fs::exists(a.manifest)) throw ValidationError("--manifest: file not found: " + a.manifest);
        const json doc = json::parse(read_text_file(a.manifest));
        if (!doc.is_array()) throw ValidationError("--manifest: expected a JSON array");
        for (const auto& e : doc) {
            EvalPair p;
            p.id = e.value("id", "pair" + std::to_string(pairs.size()));
            // both the eval schema (ref/test) and the damage manifest (clean/damaged) are accepted
            p.ref = e.contains("ref") ? e["ref"].get<std::string>() : e.value("clean", "");
            p.test = e.contains("test") ? e["test"].get<std::string>() : e.value("damaged", "");
            p.ref_text = e.value("ref_text", "");
            p.test_text = e.value("test_text", "");
            if (p.ref.empty() || p.test.empty())
                throw ValidationError("--manifest: entry without ref/test images: " + p.id);
            pairs.push_back(std::move(p));
        }
    } else {
        if (a.refs.empty() || a.tests.empty())
            throw ValidationError("eval needs --manifest or both --refs and --tests");
        const auto refs = list_images(a.refs);
        const auto tests = list_images(a.tests);
        if (refs.size() != tests.size())
            throw ValidationError("--refs and --tests contain different numbers of images");
        for (size_t i = 0; i < refs.size(); ++i) {
            EvalPair p;
            p.id = refs[i].stem().string();
            p.ref = refs[i].string();
            p.test = tests[i].string();
            if (!a.ref_texts.empty()) {
                const auto t = fs::path(a.ref_texts) / (refs[i].stem().string() + ".txt");
                if (fs::exists(t)) p.ref_text = t.string();
            }
            if (!a.test_texts.empty()) {
                const auto t = fs::path(a.test_texts) / (tests[i].stem().string() + ".txt");
                if (fs::exists(t)) p.test_text = t.string();
            }
            pairs.push_back(std::move(p));
        }
    }
    if (pairs.empty()) throw ValidationError("eval: no pairs to score");
    return pairs;
}

int cmd_eval(const EvalArgs& a) {
    const auto pairs = collect_pairs(a);
    fs::create_directories(a.out);

    struct Row {
        std::string id;
        std::optional<double> psnr, ssim, trs, lls;
        std::optional<long long> ld;
    };
    std::vector<Row> rows;
    for (const auto& p : pairs) {
        Row r;
        r.id = p.id;
        if (!fs::exists(p.ref)) throw ValidationError("eval: missing image " + p.ref);
        if (!fs::exists(p.test)) throw ValidationError("eval: missing image " + p.test);
        const ImageTensor ref = load_image(p.ref);
        const ImageTensor test = load_image(p.test);
        if (ref.height != test.height || ref.width != test.width)
            throw ValidationError("eval: dimensions differ for pair " + p.id);
        r.psnr = psnr(ref, test);
        r.ssim = ssim(ref, test);
        if (!p.ref_text.empty() && !p.test_text.empty()) {
            const MetricScore ms =
                score_text_pair(trimmed_file_text(p.ref_text), trimmed_file_text(p.test_text), a.s, a.normalize);
            r.ld = ms.ld;
            r.trs = ms.trs;
            r.lls = ms.lls;
        }
        rows.push_back(std::move(r));
    }

    auto mean_of = [&](auto getter) -> std::optional<double> {
        double sum = 0.0;
        int n = 0;
        for (const auto& r : rows) {
            const auto v = getter(r);
            if (v) {
                sum += *v;
                ++n;
            }
        }
        if (n == 0) return std::nullopt;
        return sum / n;
    };
    const auto avg_psnr = mean_of([](const Row& r) { return r.psnr; });
    const auto avg_ssim = mean_of([](const Row& r) { return r.ssim; });
    const auto avg_ld = mean_of([](const Row& r) -> std::optional<double> {
        if (r.ld) return static_cast<double>(*r.ld);
        return std::nullopt;
    });
    const auto avg_trs = mean_of([](const Row& r) { return r.trs; });
    const auto avg_lls = mean_of([](const Row& r) { return r.lls; });

    auto cell = [&](const std::optional<double>& v) -> std::string {
        if (!v) return "";
        if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
        return json(*v).dump();
    };

    {
        std::ofstream csv(fs::path(a.out) / "eval.csv");
        csv << "id,psnr,ssim,ld,trs,lls\r\n";
        for (const auto& r : rows) {
            csv << r.id << ',' << cell(r.psnr) << ',' << cell(r.ssim) << ','
                << (r.ld ? std::to_string(*r.ld) : "") << ',' << cell(r.trs) << ',' << cell(r.lls)
                << "\r\n";
        }
        csv << "average," << cell(avg_psnr) << ',' << cell(avg_ssim) << ',' << cell(avg_ld) << ','
            << cell(avg_trs) << ',' << cell(avg_lls) << "\r\n";
    }

    ordered_json jout;
    jout["pairs"] = ordered_json::array();
    auto jnum = [](const std::optional<double>& v) -> ordered_json {
        if (!v) return nullptr;
        if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
        return *v;
    };
    for (const auto& r : rows) {
        ordered_json e;
        e["id"] = r.id;
        e["psnr"] = jnum(r.psnr);
        e["ssim"] = jnum(r.ssim);
        e["ld"] = r.ld ? ordered_json(*r.ld) : ordered_json(nullptr);
        e["trs"] = jnum(r.trs);
        e["lls"] = jnum(r.lls);
        jout["pairs"].push_back(std::move(e));
    }
    jout["average"] = {{"psnr", jnum(avg_psnr)}, {"ssim", jnum(avg_ssim)}, {"ld", jnum(avg_ld)},
                       {"trs", jnum(avg_trs)},   {"lls", jnum(avg_lls)}};
    write_json_file((fs::path(a.out) / "eval.json").string(), jout);

    // one bar chart per available metric
    std::vector<std::string> labels;
    for (const auto& r : rows) labels.push_back(r.id);
    auto plot_metric = [&](const char* name, auto getter) {
        std::vector<double> vals;
        for (const auto& r : rows) {
            const auto v = getter(r);
            if (!v || std::isinf(*v)) return;  // skip incomplete metrics
            vals.push_back(*v);
        }
        plot_bars(labels, vals, name, (fs::path(a.out) / (std::string(name) + ".png")).string());
    };
    plot_metric("psnr", [](const Row& r) { return r.psnr; });
    plot_metric("ssim", [](const Row& r) { return r.ssim; });
    plot_metric("trs", [](const Row& r) { return r.trs; });
    plot_metric("lls", [](const Row& r) { return r.lls; });
    plot_metric("ld", [](const Row& r) -> std::optional<double> {
        if (r.ld) return static_cast<double>(*r.ld);
        return std::nullopt;
    });

    std::cout << "wrote " << (fs::path(a.out) / "eval.csv").string() << '\n';
    return 0;
}

// ---------------------------------------------------------------- damage

struct DamageArgs {
    std::string in, out, kind = "scratch", model = "gaussian";
    std::uint64_t seed = 0;
    int count = 4;
    double width_min = 2.0, width_max = 8.0, fill = -1.0;
    double sigma = 0.1, flip_prob = 0.05;
};

int cmd_damage(const DamageArgs& a) {
    DamageSpec spec;
    spec.seed = a.seed;
    if (a.kind == "scratch") {
        spec.kind = DamageKind::Scratch;
        spec.scratch = {a.count, a.width_min, a.width_max, a.fill};
    } else if (a.kind == "noise") {
        spec.kind = DamageKind::Noise;
        spec.noise.model = a.model == "saltpepper" ? NoiseModel::SaltPepper : NoiseModel::Gaussian;
        spec.noise.sigma = a.sigma;
        spec.noise.flip_prob = a.flip_prob;
    } else {
        throw ValidationError("--kind must be 'scratch' or 'noise'");
    }
    if (!fs::is_directory(a.in)) throw ValidationError("--in: not a directory: " + a.in);
    const std::string manifest = make_pair_manifest(a.in, a.out, {spec});
    std::cout << "wrote " << manifest << '\n';
    return 0;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
    std::string input, mask, exemplars, out = "mesa-ablate", backbone;
    std::string grid_agg = "min,avg";
    std::string grid_layers = "2,3,4,5";
    std::string grid_init = "input";
    int max_iters = 150;
    int budget = 24;
    int jobs = 1;
    std::uint64_t seed = 1;
    double mask_threshold = 0.5;
};

int cmd_ablate(const AblateArgs& a) {
    if (!fs::exists(a.input)) throw ValidationError("--input: file not found: " + a.input);
    if (!fs::exists(a.mask)) throw ValidationError("--mask: file not found: " + a.mask);

    std::vector<Aggregation> aggs;
    {
        std::stringstream ss(a.grid_agg);
        std::string tok;
        while (std::getline(ss, tok, ',')) aggs.push_back(aggregation_from_name(tok));
    }
    std::vector<int> layer_counts;
    {
        std::stringstream ss(a.grid_layers);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            const int k = std::stoi(tok);
            if (k < 1 || k > kTapCount) throw ValidationError("--grid-layers: counts must be in 1..5");
            layer_counts.push_back(k);
        }
    }
    std::vector<InitMode> inits;
    {
        std::stringstream ss(a.grid_init);
        std::string tok;
        while (std::getline(ss, tok, ',')) inits.push_back(init_mode_from_name(tok));
    }
    const size_t cells = aggs.size() * layer_counts.size() * inits.size();
    if (cells == 0) throw ValidationError("ablate: empty grid");
    if (static_cast<int>(cells) > a.budget)
        throw ValidationError("ablate: grid of " + std::to_string(cells) + " cells exceeds --budget " +
                              std::to_string(a.budget));

    const ImageTensor damaged = load_image(a.input);
    const BinaryMask mask = load_mask(a.mask, a.mask_threshold);
    const Backbone net = load_backbone_checked(a.backbone);
    const auto exemplar_paths = list_images(a.exemplars);
    if (exemplar_paths.empty()) throw ValidationError("--exemplars: no images in " + a.exemplars);
    std::vector<ImageTensor> exemplar_images;
    for (const auto& p : exemplar_paths) exemplar_images.push_back(load_image(p.string()));
    const ExemplarPool pool = ExemplarPool::build(net, std::move(exemplar_images));

    struct Cell {
        Aggregation agg;
        int layer_count;
        InitMode init;
        std::string label;
        RestorationResult result;
    };
    std::vector<Cell> grid;
    for (const auto agg : aggs)
        for (const int lc : layer_counts)
            for (const auto init : inits) {
                Cell c;
                c.agg = agg;
                c.layer_count = lc;
                c.init = init;
                c.label = std::string(aggregation_name(agg)) + "_" + std::to_string(lc) + "L_" +
                          init_mode_name(init);
                grid.push_back(std::move(c));
            }

    auto run_cell = [&](Cell& c) {
        RestorationConfig cfg;
        cfg.max_iterations = a.max_iters;
        cfg.aggregation = c.agg;
        cfg.init = c.init;
        cfg.noise_seed = a.seed;
        std::vector<LayerId> ids;
        for (int i = 0; i < c.layer_count; ++i) ids.push_back(tap_layers()[i].id);
        cfg.layers = ids;
        c.result = restore(damaged, mask, net, pool, LayerWeighting::uniform(ids), cfg);
    };

    const int jobs = std::max(1, a.jobs);
    for (size_t base = 0; base < grid.size(); base += jobs) {
        std::vector<std::future<void>> running;
        for (size_t i = base; i < std::min(grid.size(), base + jobs); ++i)
            running.push_back(std::async(std::launch::async, [&grid, i, &run_cell]() { run_cell(grid[i]); }));
        for (auto& f : running) f.get();
    }

    fs::create_directories(a.out);
    {
        std::ofstream csv(fs::path(a.out) / "ablate.csv");
        csv << "cell,aggregation,layers,init,iterations,initial_loss,final_loss,stop_reason\r\n";
        for (const auto& c : grid) {
            const double final_loss =
                c.result.loss_trace.empty() ? c.result.initial_loss : c.result.loss_trace.back();
            csv << c.label << ',' << aggregation_name(c.agg) << ',' << c.layer_count << ','
                << init_mode_name(c.init) << ',' << c.result.iterations_run << ','
                << json(c.result.initial_loss).dump() << ',' << json(final_loss).dump() << ','
                << stop_reason_name(c.result.stop_reason) << "\r\n";
        }
    }

    std::vector<ImageTensor> tiles;
    std::vector<std::string> labels;
    for (const auto& c : grid) {
        save_image(c.result.output, (fs::path(a.out) / (c.label + ".png")).string());
        tiles.push_back(c.result.output);
        labels.push_back(c.label);
    }
    const int columns = static_cast<int>(inits.size() * layer_counts.size());
    const ImageTensor sheet = contact_sheet(tiles, labels, std::max(1, columns), 128);
    save_image(sheet, (fs::path(a.out) / "contact_sheet.png").string());

    std::cout << "wrote " << (fs::path(a.out) / "ablate.csv").string() << " (" << grid.size()
              << " cells)\n";
    return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
    CLI::App app{"MESA: multi-exemplar style-aware restoration of inscription images"};
    app.require_subcommand(1);

    RestoreArgs ra;
    auto* restore_cmd = app.add_subcommand("restore", "Restore the masked region of a damaged inscription");
    restore_cmd->add_option("--input", ra.input, "Damaged input image (PNG/JPEG)")->required();
    restore_cmd->add_option("--mask", ra.mask, "Damage mask (PNG, nonzero = damaged)")->required();
    restore_cmd->add_option("--exemplars", ra.exemplars, "Directory of exemplar images")->required();
    restore_cmd->add_option("--out", ra.out, "Output directory");
    restore_cmd->add_option("--backbone", ra.backbone, "Backbone weights file");
    restore_cmd->add_option("--layers", ra.layers, "Comma-separated tap layers");
    restore_cmd->add_option("--agg", ra.agg, "Exemplar aggregation: min|avg");
    restore_cmd->add_option("--init", ra.init, "Initialization: input|noise");
    restore_cmd->add_option("--max-iters", ra.max_iters, "Iteration cap");
    restore_cmd->add_option("--weights-scheme", ra.weights_scheme, "rf-partition|sigma-intervals");
    restore_cmd->add_option("--weights-file", ra.weights_file, "Precomputed layer-weights JSON");
    restore_cmd->add_option("--boxes", ra.boxes, "OCR box table for weight fitting");
    restore_cmd->add_option("--boxes-format", ra.boxes_format, "mesa|tesseract");
    restore_cmd->add_option("--mask-threshold", ra.mask_threshold, "Mask luminance threshold");
    restore_cmd->add_option("--tol", ra.tol, "Relative loss-change stop tolerance");
    restore_cmd->add_option("--seed", ra.seed, "Noise-init seed");
    restore_cmd->add_option("--log-every", ra.log_every, "Progress interval (iterations)");
    restore_cmd->add_flag("--save-progress", ra.save_progress, "Write checkpoint images");
    restore_cmd->add_flag("--mask-static", ra.mask_static, "Composite only at initialization");

    WeightsArgs wa;
    auto* weights_cmd = app.add_subcommand("weights", "Fit letter-width distribution and derive layer weights");
    weights_cmd->add_option("--boxes", wa.boxes, "OCR box table")->required();
    weights_cmd->add_option("--boxes-format", wa.boxes_format, "mesa|tesseract");
    weights_cmd->add_option("--scheme", wa.scheme, "rf-partition|sigma-intervals");
    weights_cmd->add_option("--layers", wa.layers, "Comma-separated tap layers");
    weights_cmd->add_option("--out", wa.out, "Output directory");
    std::uint64_t weights_seed = 0;
    weights_cmd->add_option("--seed", weights_seed, "Accepted for interface uniformity (deterministic command)");

    std::string et_original, et_recovered;
    long long et_s = 100;
    bool et_normalize = false;
    auto* et_cmd = app.add_subcommand("eval-text", "Text recovery metrics for two text files");
    et_cmd->add_option("--original", et_original, "Ground-truth text file")->required();
    et_cmd->add_option("--recovered", et_recovered, "Recovered text file")->required();
    et_cmd->add_option("--s", et_s, "TRS normalization cap");
    et_cmd->add_flag("--normalize", et_normalize, "Uppercase + collapse whitespace first");
    std::uint64_t et_seed = 0;
    et_cmd->add_option("--seed", et_seed, "Accepted for interface uniformity (deterministic command)");

    std::string ei_ref, ei_test, ei_perceptual;
    auto* ei_cmd = app.add_subcommand("eval-image", "Image quality metrics for two images");
    ei_cmd->add_option("--ref", ei_ref, "Reference image")->required();
    ei_cmd->add_option("--test", ei_test, "Test image")->required();
    ei_cmd->add_option("--perceptual", ei_perceptual, "Registered perceptual scorer name");
    std::uint64_t ei_seed = 0;
    ei_cmd->add_option("--seed", ei_seed, "Accepted for interface uniformity (deterministic command)");

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Batch evaluation over image (and text) pairs");
    eval_cmd->add_option("--manifest", ea.manifest, "JSON array of pairs");
    eval_cmd->add_option("--refs", ea.refs, "Directory of reference images");
    eval_cmd->add_option("--tests", ea.tests, "Directory of test images");
    eval_cmd->add_option("--ref-texts", ea.ref_texts, "Directory of reference .txt files");
    eval_cmd->add_option("--test-texts", ea.test_texts, "Directory of test .txt files");
    eval_cmd->add_option("--out", ea.out, "Output directory");
    eval_cmd->add_option("--s", ea.s, "TRS normalization cap");
    eval_cmd->add_flag("--normalize", ea.normalize, "Normalize text before scoring");
    std::uint64_t eval_seed = 0;
    eval_cmd->add_option("--seed", eval_seed, "Accepted for interface uniformity (deterministic command)");

    DamageArgs da;
    auto* damage_cmd = app.add_subcommand("damage", "Generate synthetic damage pairs from clean images");
    damage_cmd->add_option("--in", da.in, "Directory of clean images")->required();
    damage_cmd->add_option("--out", da.out, "Output directory")->required();
    damage_cmd->add_option("--kind", da.kind, "scratch|noise");
    damage_cmd->add_option("--seed", da.seed, "Base seed");
    damage_cmd->add_option("--count", da.count, "Scratch stroke count");
    damage_cmd->add_option("--width-min", da.width_min, "Scratch width lower bound (px)");
    damage_cmd->add_option("--width-max", da.width_max, "Scratch width upper bound (px)");
    damage_cmd->add_option("--fill", da.fill, "Scratch fill gray in [0,1]; <0 = background median");
    damage_cmd->add_option("--model", da.model, "gaussian|saltpepper");
    damage_cmd->add_option("--sigma", da.sigma, "Gaussian noise stddev");
    damage_cmd->add_option("--flip-prob", da.flip_prob, "Salt-and-pepper flip probability");

    AblateArgs aa;
    auto* ablate_cmd = app.add_subcommand("ablate", "Grid of restoration setups (aggregation × layers × init)");
    ablate_cmd->add_option("--input", aa.input, "Damaged input image")->required();
    ablate_cmd->add_option("--mask", aa.mask, "Damage mask")->required();
    ablate_cmd->add_option("--exemplars", aa.exemplars, "Directory of exemplar images")->required();
    ablate_cmd->add_option("--out", aa.out, "Output directory");
    ablate_cmd->add_option("--backbone", aa.backbone, "Backbone weights file");
    ablate_cmd->add_option("--grid-agg", aa.grid_agg, "Aggregations, e.g. min,avg");
    ablate_cmd->add_option("--grid-layers", aa.grid_layers, "Tap-prefix sizes, e.g. 2,3,4,5");
    ablate_cmd->add_option("--grid-init", aa.grid_init, "Initializations, e.g. input,noise");
    ablate_cmd->add_option("--max-iters", aa.max_iters, "Iteration cap per cell");
    ablate_cmd->add_option("--budget", aa.budget, "Maximum grid cells");
    ablate_cmd->add_option("--jobs", aa.jobs, "Concurrent cells");
    ablate_cmd->add_option("--seed", aa.seed, "Noise-init seed");
    ablate_cmd->add_option("--mask-threshold", aa.mask_threshold, "Mask luminance threshold");

    std::vector<const char*> argv;
    argv.push_back("mesa");
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (restore_cmd->parsed()) return cmd_restore(ra);
        if (weights_cmd->parsed()) return cmd_weights(wa);
        if (et_cmd->parsed()) return cmd_eval_text(et_original, et_recovered, et_s, et_normalize);
        if (ei_cmd->parsed()) return cmd_eval_image(ei_ref, ei_test, ei_perceptual);
        if (eval_cmd->parsed()) return cmd_eval(ea);
        if (damage_cmd->parsed()) return cmd_damage(da);
        if (ablate_cmd->parsed()) return cmd_ablate(aa);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 1;
    }
    std::cerr << "error: no subcommand given\n";
    return 2;
}

}  // namespace mesa
