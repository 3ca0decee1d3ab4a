#include <iostream>
#include <string>
#include <vector>

#include "brainage/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return brainage::dispatch(args, std::cout, std::cerr);
}
