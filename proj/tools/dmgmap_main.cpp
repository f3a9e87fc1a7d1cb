#include "dmgmap/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return dmgmap::run_cli(argc, argv, std::cout, std::cerr); }
