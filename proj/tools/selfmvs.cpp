#include <iostream>

#include "selfmvs/cli.hpp"

int main(int argc, char** argv) { return selfmvs::cli_main(argc, argv, std::cout, std::cerr); }
