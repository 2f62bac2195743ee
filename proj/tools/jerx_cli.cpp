#include "jerx/cli.hpp"

int main(int argc, char** argv) { return jerx::cli::run_cli(argc, argv); }
