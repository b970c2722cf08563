#include <iostream>

#include "igda/cli.hpp"

int main(int argc, char** argv) { return igda::cli::run(argc, argv, std::cout, std::cerr, std::cin); }
