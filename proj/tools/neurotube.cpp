#include "neurotube/cli.hpp"

int main(int argc, char** argv) { return neurotube::cli::main(argc, argv); }
