#include <iostream>
#include <string>
#include <vector>

#include "facediff/cli.hpp"

int main(int argc, char** argv) {
  return facediff::cli::dispatch(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
