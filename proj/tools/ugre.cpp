#include <iostream>

#include "ugre/cli.hpp"

int main(int argc, char** argv) { return ugre::cli_dispatch(argc, argv, std::cout, std::cerr); }
