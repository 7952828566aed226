#include "cotlab/cli/dispatch.hpp"

int main(int argc, char** argv) { return cotlab::cli::dispatch(argc, argv); }
