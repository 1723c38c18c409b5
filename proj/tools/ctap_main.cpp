#include "ctap/cli.hpp"

int main(int argc, char** argv) { return ctap::run_cli(argc, argv); }
