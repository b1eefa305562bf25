#include <iostream>
#include <string>
#include <vector>

#include "h3trans/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return h3t::run_cli(args, std::cout, std::cerr);
}
