#include "fairflow/cli.hpp"

int main(int argc, char** argv) { return fairflow::cli::main(argc, argv); }
