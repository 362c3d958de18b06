#include "csd/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return csd::cli::run(argc, argv, std::cout, std::cerr);
}
