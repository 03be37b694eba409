#include <mnn/cli.hpp>

int main(int argc, char** argv) { return mnn::cli::dispatch(argc, argv); }
