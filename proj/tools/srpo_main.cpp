#include <iostream>

#include "srpo/cli.hpp"

int main(int argc, char** argv) { return srpo::run_cli(argc, argv, std::cout, std::cerr); }
