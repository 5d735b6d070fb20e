#include <iostream>

#include "gftnn/cli.hpp"

int main(int argc, char** argv) { return gftnn::run_cli(argc, argv, std::cout, std::cerr); }
