#include "optree/cli.hpp"

int main(int argc, char** argv) { return optree::run_cli(argc, argv); }
