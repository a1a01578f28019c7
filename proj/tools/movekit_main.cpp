#include "movekit/cli.hpp"

int main(int argc, char** argv) { return movekit::run_cli(argc, argv); }
