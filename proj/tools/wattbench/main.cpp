#include "commands.hpp"

int main(int argc, char** argv) { return wattbench::cli::run(argc, argv); }
