#include "dynkit/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return dynkit::run_cli(argc, argv, std::cout, std::cerr); }
