#include <iostream>
#include <string>
#include <vector>

#include "cate/cli.hpp"

int main(int argc, char** argv) {
  return cate::cli_main(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
