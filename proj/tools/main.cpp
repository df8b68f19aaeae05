#include <iostream>

#include "mda/cli.hpp"

int main(int argc, char** argv) { return mda::run_cli(argc, argv, std::cout, std::cerr); }
