#include <iostream>

#include "plp/cli.hpp"

int main(int argc, char** argv) {
    return plp::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
