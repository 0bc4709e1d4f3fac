#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace apnn {

// Output head. zero_mean_v subtracts the velocity average computed with the
// run's quadrature rule, so the head is applied where a velocity column is
// available (see losses); identity and softplus are pointwise.
enum class Head : int { identity = 0, softplus = 1, zero_mean_v = 2 };

// Fully connected tanh network. Parameters are stored flat, per layer weights
// (row-major, [out][in]) followed by biases, which is also the checkpoint
// order.
struct Mlp {
  std::vector<int> widths;  // input, hidden..., output
  Head head = Head::identity;
  std::uint64_t seed = 0;   // seed used by xavier_init, kept for provenance
  std::vector<double> params;
  std::vector<std::size_t> w_off, b_off;

  int layers() const { return int(widths.size()) - 1; }
  int in_width() const { return widths.front(); }
  int out_width() const { return widths.back(); }
  std::size_t n_params() const { return params.size(); }

  double* W(int l) { return params.data() + w_off[l]; }
  const double* W(int l) const { return params.data() + w_off[l]; }
  double* bias(int l) { return params.data() + b_off[l]; }
  const double* bias(int l) const { return params.data() + b_off[l]; }
};

// widths needs an input, at least one hidden, and an output entry.
Mlp make_mlp(std::vector<int> widths, Head head);

// Uniform(-b, b) weights with b = sqrt(6/(fan_in+fan_out)), zero biases.
// Identical seeds give bit-identical parameters.
void xavier_init(Mlp& net, std::uint64_t seed);

// Branch-stable softplus and its first three derivatives.
double softplus(double x);
double sigmoid(double x);

// Binary checkpoint: header (widths, head, seed, iteration), then the flat
// parameter block in storage order.
void save_checkpoint(const Mlp& net, const std::string& path,
                     std::uint64_t iteration);
Mlp load_checkpoint(const std::string& path, std::uint64_t* iteration = nullptr);

}
