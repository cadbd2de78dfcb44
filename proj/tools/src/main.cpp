#include <iostream>

#include "ilt/cli.hpp"

int main(int argc, char** argv) {
  return ilt::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
