#include "modalform/pipeline.hpp"

int main(int argc, char** argv) { return modalform::run_cli(argc, argv); }
