#include <string>
#include <vector>

#include "occmil/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return occmil::cli::run_cli(args);
}
