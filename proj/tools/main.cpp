#include <iostream>
#include <string>
#include <vector>

#include "bbfnet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return bbf::cli::dispatch(args, std::cout, std::cerr);
}
