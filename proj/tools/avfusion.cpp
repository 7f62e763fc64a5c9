#include <iostream>

#include "avfusion/cli.hpp"

int main(int argc, char** argv) { return avf::cli::run(argc, argv, std::cout, std::cerr); }
