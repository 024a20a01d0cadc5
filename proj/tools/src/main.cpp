#include <iostream>

#include "icnn/app/commands.hpp"

int main(int argc, char** argv) { return icnn::app::run_cli(argc, argv, std::cout, std::cerr); }
