#include <cstdlib>

#include <Eigen/Core>

#include "mlgp/cli.hpp"

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("MLGP_NUM_THREADS"))
    Eigen::setNbThreads(std::atoi(threads));
  return mlgp::run_cli(argc, argv);
}
