#include <iostream>

#include "stkrl/cli.hpp"

int main(int argc, char** argv) { return stkrl::run_cli(argc, argv, std::cout, std::cerr); }
