// Writes a seeded He-initialized backbone weights file. Useful for tests and
// for running the pipeline offline; convert pretrained weights with
// tools/convert_vgg19_weights.py for restoration-quality features.

#include "mesa/backbone.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Generate random backbone weights"};
    std::uint64_t seed = 7;
    std::string out = "mesa-backbone.weights";
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("--out", out, "Output path")->required();
    CLI11_PARSE(app, argc, argv);

    try {
        mesa::save_backbone_params(mesa::random_backbone_params(seed), out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::cout << "wrote " << out << '\n';
    return 0;
}
