#include <iostream>

#include "mfsr/cli/app.hpp"

int main(int argc, char** argv) { return mfsr::cli::run(argc, argv, std::cout, std::cerr); }
