#include <iostream>
#include <string>
#include <vector>

#include "samgpt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return samgpt::dispatch(args, std::cout, std::cerr);
}
