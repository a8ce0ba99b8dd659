#include <iostream>

#include "circularity/cli.hpp"

int main(int argc, char** argv) { return circularity::run_cli(argc, argv, std::cout, std::cerr); }
