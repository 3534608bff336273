#include "panelode/cli.hpp"

int main(int argc, char** argv) { return panelode::cli::run(argc, argv); }
