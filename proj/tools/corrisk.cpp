#include "corrisk/cli.hpp"

int main(int argc, char** argv) { return corrisk::run_cli(argc, argv); }
