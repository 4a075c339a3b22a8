#include "finsler_forge/cli.hpp"

int main(int argc, char** argv) { return finsler::run_main(argc, argv); }
