#include "senseauction/cli.hpp"

int main(int argc, char** argv) { return senseauction::cli::run_cli(argc, argv); }
