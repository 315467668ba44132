#include "bfl1/cli.hpp"

int main(int argc, char** argv) { return bfl1::run_cli(argc, argv); }
