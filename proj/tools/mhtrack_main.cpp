#include <string>
#include <vector>

#include "mhtrack/bench.hpp"

int main(int argc, char** argv)
{
    return mhtrack::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}
