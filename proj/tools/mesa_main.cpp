#include "mesa/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return mesa::run_cli(std::move(args));
}
