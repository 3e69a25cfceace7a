#include <iostream>
#include <string>
#include <vector>

#include "tailgan/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return tailgan::cli::run(args, std::cout, std::cerr);
}
