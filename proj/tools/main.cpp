#include "semxc/cli.hpp"

int main(int argc, char** argv) { return semxc::cli::run(argc, argv); }
