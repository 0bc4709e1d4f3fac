#pragma once

#include <vector>

#include "apnn/jet.hpp"
#include "apnn/mlp.hpp"

namespace apnn {

// Recorded forward pass of one batched raw-network evaluation (head not
// applied). Row r = sample * lay.count + slot holds that slot's value for
// every neuron of a layer. z are pre-activations, a the tanh images; the last
// layer has no activation, so its z block is the raw output.
struct EvalRecord {
  const Mlp* net = nullptr;
  SlotLayout lay;
  int n = 0;
  std::vector<double> in;               // [rows x widths[0]]
  std::vector<std::vector<double>> z;   // per layer, [rows x widths[l+1]]
  std::vector<std::vector<double>> a;   // per hidden layer, same shape as z

  int rows() const { return n * lay.count; }
  const double* out() const { return z.back().data(); }
};

// Propagates value and derivative slots through the layers. in is the seeded
// input jet block, [n*lay.count x widths[0]]. Deterministic for any OpenMP
// thread count: every output element is accumulated in a fixed order.
void forward_batch(const Mlp& net, const SlotLayout& lay, const double* in,
                   int n, EvalRecord& rec);

// Reverse sweep over a recorded forward pass. out_adj holds dLoss/d(raw
// output jets), [rows x out_width]; parameter gradients are accumulated into
// grad (size net.n_params()). Also deterministic for any thread count.
void backward_batch(const EvalRecord& rec, const double* out_adj, double* grad);

// Worker cap shared by all parallel kernels: the --threads flag when given,
// else the APNN_THREADS environment variable, else 1.
int worker_count();
void set_worker_count(int n);

namespace refk {

// Plain per-sample reference implementations used to validate and benchmark
// the batched kernels.
Jet forward_jet(const Mlp& net, const SlotLayout& lay, const Jet* in);
double forward_value(const Mlp& net, const double* in);

}

}
