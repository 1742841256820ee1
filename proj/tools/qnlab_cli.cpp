#include <iostream>
#include <string>
#include <vector>

#include "qnlab/harness/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return qnlab::harness::run_cli(args, std::cout, std::cerr);
}
