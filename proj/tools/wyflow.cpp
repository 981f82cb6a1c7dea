#include <iostream>

#include "wyflow/commands.hpp"

int main(int argc, char** argv) { return wyflow::cli_main(argc, argv, std::cout, std::cerr); }
