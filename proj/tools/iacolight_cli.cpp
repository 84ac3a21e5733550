#include "iacolight/cli/commands.hpp"

#include <iostream>

int main(int argc, char **argv)
{
    return iacolight::cli::run_cli(argc, argv, std::cout, std::cerr);
}
