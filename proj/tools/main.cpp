#include "nedsim/cli.hpp"

int main(int argc, char** argv) { return nedsim::cli::run_cli(argc, argv); }
