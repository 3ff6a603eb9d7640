#include <iostream>

#include "scoremix/cli.hpp"

int main(int argc, char** argv) { return smx::cli::run(argc, argv, std::cout, std::cerr); }
