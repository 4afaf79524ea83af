#include "commands.hpp"

int main(int argc, char** argv) { return nowcast::cli::run_cli(argc, argv); }
