#include <iostream>

#include "spcar/cli.hpp"

int main(int argc, char** argv) { return spcar::cli::run(argc, argv, std::cout, std::cerr); }
