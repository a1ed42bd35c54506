#include <iostream>

#include "drape/cli.hpp"

int main(int argc, char** argv) { return drape::run_cli(argc, argv, std::cout, std::cerr); }
