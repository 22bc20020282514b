#include <iostream>

#include "mixtrack/cli.hpp"

int main(int argc, char** argv) { return mixtrack::cli::run(argc, argv, std::cout, std::cerr); }
