#include <iostream>

#include "mog/cli.hpp"

int main(int argc, char** argv) { return mog::cli::run(argc, argv, std::cout, std::cerr); }
