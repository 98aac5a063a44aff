#include "seqcr/cli.hpp"

int main(int argc, char** argv) { return seqcr::run_cli(argc, argv); }
