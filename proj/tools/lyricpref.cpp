#include "lyricpref/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return lyricpref::run_cli(argc, argv, std::cout, std::cerr); }
