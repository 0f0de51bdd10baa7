#include <iostream>
#include <string>
#include <vector>

#include "temp_heal/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return temp::cli::run(args, std::cout, std::cerr);
}
