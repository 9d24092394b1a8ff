#include <iostream>

#include "lsm/cli.hpp"

int main(int argc, char** argv) { return lsm::cli::run(argc, argv, std::cout, std::cerr); }
