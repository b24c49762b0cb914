#include <iostream>

#include "lmtp/cli.hpp"

int main(int argc, char** argv) { return lmtp::run_cli(argc, argv, std::cout, std::cerr); }
