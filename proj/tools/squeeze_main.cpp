#include <iostream>
#include <string>
#include <vector>

#include "squeeze/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return squeeze::run_cli(args, std::cout, std::cerr);
}
