#include "lfgnss/cli.hpp"

int main(int argc, char** argv) { return lfgnss::cli::main(argc, argv); }
