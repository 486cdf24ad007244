#include <iostream>
#include <string>
#include <vector>

#include "gbc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gbc::cli::run(args, std::cout, std::cerr);
}
