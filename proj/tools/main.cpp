#include "hypoql/cli.hpp"

int main(int argc, char** argv) { return hypoql::run_cli(argc, argv); }
