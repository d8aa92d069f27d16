#include "coss/cli.hpp"

int main(int argc, char** argv) {
  coss::pin_blas_threads();
  return coss::cli::run_cli(argc, argv);
}
