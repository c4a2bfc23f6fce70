#include "cavitas/cli.hpp"

int main(int argc, char** argv) { return cavitas::cli::main_entry(argc, argv); }
