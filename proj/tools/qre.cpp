#include <iostream>

#include "qre/cli.hpp"

int main(int argc, char** argv) { return qre::cli::main(argc, argv, std::cout, std::cerr); }
