#include "cli.hpp"

int main(int argc, char** argv) { return henon::cli::main_entry(argc, argv); }
