#include <iostream>

#include "saflbench/cli.hpp"

int main(int argc, char** argv) {
  return saflbench::cli::run_cli(argc, argv, std::cout, std::cerr);
}
