#include <iostream>

#include "railevent/cli.hpp"

int main(int argc, char** argv) { return railevent::cli::run(argc, argv, std::cout, std::cerr); }
