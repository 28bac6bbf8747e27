#include "hypervq/cli.hpp"

int main(int argc, char** argv) { return hypervq::cli::run_cli(argc, argv); }
