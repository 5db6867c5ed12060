#include <iostream>

#include "sadi/cli.hpp"

int main(int argc, char** argv) { return sadi::run_cli(argc, argv, std::cout, std::cerr); }
