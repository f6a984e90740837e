#include "fdcnet_cli/cli.hpp"

int main(int argc, char** argv) { return fdcnet::cli::run(argc, argv); }
