#include "nilmix/cli_runner.hpp"

int main(int argc, char** argv) { return nilmix::run_cli(argc, argv); }
