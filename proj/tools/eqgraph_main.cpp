#include "eqgraph/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return eqgraph::run_cli(argc, argv, std::cout, std::cerr); }
