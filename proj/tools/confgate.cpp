#include <iostream>

#include "confgate/cli/cli.hpp"

int main(int argc, char** argv) {
    return confgate::cli::run_cli(argc, argv, std::cout, std::cerr);
}
