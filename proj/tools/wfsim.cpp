#include "wfsim/shell.hpp"

int main(int argc, char** argv) { return wfsim::shell::run_cli(argc, argv); }
