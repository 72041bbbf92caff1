#include <iostream>

#include "augsplice/cli.hpp"

int main(int argc, char** argv) { return augsplice::run_cli(argc, argv, std::cout, std::cerr); }
