#include <iostream>
#include <string>
#include <vector>

#include "gwbayes/cli/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return gwbayes::cli::run(args, std::cout, std::cerr);
}
