#include <iostream>
#include "w2s/orchestrator.hpp"
int main(int argc, char** argv) { return w2s::run_cli(argc, argv, std::cout, std::cerr); }
