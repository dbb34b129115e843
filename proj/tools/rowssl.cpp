#include <iostream>

#include "rowssl/cli.hpp"

int main(int argc, char** argv) { return rowssl::run_cli(argc, argv, std::cout, std::cerr); }
