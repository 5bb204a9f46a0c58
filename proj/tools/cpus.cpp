#include <iostream>
#include <string>
#include <vector>

#include "cpus/cli.hpp"

int main(int argc, char* argv[]) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cpus::cli::dispatch(std::move(args), std::cout, std::cerr);
}
