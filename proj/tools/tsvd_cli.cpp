#include "tsvd/cli.hpp"

int main(int argc, char** argv) {
  return tsvd::cli_dispatch(argc, argv);
}
