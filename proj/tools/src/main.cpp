#include <iostream>

#include "edngtm/cli.hpp"

int main(int argc, char** argv) { return edngtm::cli::cli_dispatch(argc, argv, std::cout, std::cerr); }
