#include "flab/lab.h"

int main(int argc, char** argv) { return flab::run_cli(argc, argv); }
