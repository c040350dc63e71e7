#include "comet/cli.hpp"

int main(int argc, char** argv) { return comet::run_cli(argc, argv); }
