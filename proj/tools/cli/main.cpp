#include <iostream>

#include "dispatch.hpp"

int main(int argc, char** argv) { return termctl::cli::dispatch(argc, argv, std::cout, std::cerr); }
