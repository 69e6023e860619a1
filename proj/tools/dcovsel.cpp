#include <dcovsel/commands.hpp>

int main(int argc, char** argv)
{
    return dcovsel::cli::run_cli(argc, argv);
}
