#include "pftopo/io.hpp"

int main(int argc, char** argv) { return pftopo::cli_run(argc, argv); }
