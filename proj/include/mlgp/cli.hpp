#ifndef MLGP_CLI_HPP
#define MLGP_CLI_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mlgp/kernel.hpp"

namespace mlgp {

// Exit codes: 0 success, 1 usage, 2 IO, 3 numeric failure.
int run_cli(std::vector<std::string> args);
int run_cli(int argc, char** argv);

// Timing comparison between the subspace and free-Z paths on synthetic
// sparse data; shared by the `bench` subcommand and the acceptance suite.
struct BenchSpec {
  Index n{2000};
  Index d{100000};
  Index m{200};
  Index rank{200};
  Index batch{256};
  Index latents{4};
  Index n_labels{30};
  Index nnz_per_row{50};
  KernelSpec::Kind kernel{KernelSpec::Kind::linear};
  std::uint64_t seed{0};
  int repeats{5};
};

struct BenchReport {
  double basis_build_s{0.0};
  double subspace_gram_kl_s{0.0};  // median K_Z build + P KL terms
  double free_gram_kl_s{0.0};
  double subspace_step_s{0.0};     // median full gradient evaluation
  double free_step_s{0.0};

  double gram_kl_ratio() const { return free_gram_kl_s / subspace_gram_kl_s; }
  double step_ratio() const { return free_step_s / subspace_step_s; }
  std::string to_string() const;
};

BenchReport run_bench(const BenchSpec& spec);

}  // namespace mlgp

#endif
