#include "palmer/cli.hpp"

int main(int argc, char** argv) { return palmer::run_cli(argc, argv); }
