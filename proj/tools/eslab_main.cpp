#include "eslab/cli.hpp"

int main(int argc, char** argv) { return eslab::run_cli(argc, argv); }
