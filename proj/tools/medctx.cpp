#include "medctx/cli.hpp"

int main(int argc, char** argv) { return medctx::run_command(argc, argv); }
