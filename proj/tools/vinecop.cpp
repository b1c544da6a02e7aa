#include <iostream>

#include "vinecop/cli.hpp"

int main(int argc, char** argv) { return vinecop::cli::run(argc, argv, std::cout, std::cerr); }
