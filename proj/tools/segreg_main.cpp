#include "segreg/cli.hpp"

int main(int argc, char** argv) { return segreg::cli::main(argc, argv); }
