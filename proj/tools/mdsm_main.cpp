#include "mdsm/cli.hpp"

int main(int argc, char** argv) { return mdsm::run_cli(argc, argv); }
