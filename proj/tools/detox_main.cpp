#include "detox/pipeline/cli.hpp"

int main(int argc, char** argv) { return detox::pipeline::run_cli(argc, argv); }
