#include <iostream>

#include "crxo/cli.hpp"

int main(int argc, char** argv) { return crxo::run_cli(argc, argv, std::cout, std::cerr); }
