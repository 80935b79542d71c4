#include "maggeo/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return maggeo::cli::main(argc, argv, std::cout, std::cerr); }
