#include <iostream>

#include "dcdepth/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dcdepth::run_cli(args, std::cout, std::cerr);
}
