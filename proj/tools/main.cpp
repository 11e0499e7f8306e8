#include <iostream>

#include "relsynth/cli.hpp"

int main(int argc, char** argv) { return relsynth::run_cli(argc, argv, std::cout, std::cerr); }
