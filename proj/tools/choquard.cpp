#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return choquard::cli::run(argc, argv, std::cout); }
