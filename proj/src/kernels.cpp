#include "apnn/kernels.hpp"

#include <omp.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>

namespace apnn {

namespace {

std::atomic<int> g_workers{0};

// Dot product with a fixed 8-lane accumulation pattern. The lane grouping is
// part of the result's definition, so values do not depend on vector width or
// thread count.
inline double dot8(const double* __restrict a, const double* __restrict w,
                   int n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  int k = 0;
  for (; k + 8 <= n; k += 8)
    for (int l = 0; l < 8; ++l) acc[l] += a[k + l] * w[k + l];
  for (; k < n; ++k) acc[k % 8] += a[k] * w[k];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

inline void axpy(double* __restrict y, double c, const double* __restrict x,
                 int n) {
  for (int k = 0; k < n; ++k) y[k] += c * x[k];
}

// z[r][o] = sum_k a[r][k] W[o][k], plus bias on value rows.
void affine_forward(const double* a, int rows, int in_w, const double* W,
                    const double* b, int out_w, const SlotLayout& lay,
                    double* z) {
  const int val = lay.at(slot_val);
  const int S = lay.count;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* ar = a + std::size_t(r) * in_w;
    double* zr = z + std::size_t(r) * out_w;
    const bool is_val = (r % S) == val;
    for (int o = 0; o < out_w; ++o) {
      double acc = dot8(ar, W + std::size_t(o) * in_w, in_w);
      zr[o] = is_val ? acc + b[o] : acc;
    }
  }
}

// tanh slot mixing for one hidden layer. a_val stores tanh(z_val) so the
// backward pass can rebuild the derivative chain without recomputing tanh.
void activation_forward(const double* z, int n, int width,
                        const SlotLayout& lay, double* a) {
  const int S = lay.count;
  const int pv = lay.at(slot_val);
  const int pt = lay.pos[slot_dt], px = lay.pos[slot_dx],
            pw = lay.pos[slot_dv];
  const int pxx = lay.pos[slot_dxx], pww = lay.pos[slot_dvv],
            ptx = lay.pos[slot_dtx];
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const std::size_t base = std::size_t(i) * S * width;
    const double* zv = z + base + std::size_t(pv) * width;
    double* av = a + base + std::size_t(pv) * width;
    for (int j = 0; j < width; ++j) av[j] = std::tanh(zv[j]);
    auto first_order = [&](int p) {
      if (p < 0) return;
      const double* zs = z + base + std::size_t(p) * width;
      double* as = a + base + std::size_t(p) * width;
      for (int j = 0; j < width; ++j) {
        const double T = av[j];
        as[j] = (1.0 - T * T) * zs[j];
      }
    };
    first_order(pt);
    first_order(px);
    first_order(pw);
    auto second_order = [&](int p, int p1) {
      if (p < 0) return;
      const double* zs = z + base + std::size_t(p) * width;
      const double* z1 = z + base + std::size_t(p1) * width;
      double* as = a + base + std::size_t(p) * width;
      for (int j = 0; j < width; ++j) {
        const double T = av[j];
        const double s = 1.0 - T * T;
        const double t2 = -2.0 * T * s;
        as[j] = s * zs[j] + t2 * z1[j] * z1[j];
      }
    };
    second_order(pxx, px);
    second_order(pww, pw);
    if (ptx >= 0) {
      const double* zs = z + base + std::size_t(ptx) * width;
      const double* z1 = z + base + std::size_t(pt) * width;
      const double* z2 = z + base + std::size_t(px) * width;
      double* as = a + base + std::size_t(ptx) * width;
      for (int j = 0; j < width; ++j) {
        const double T = av[j];
        const double s = 1.0 - T * T;
        const double t2 = -2.0 * T * s;
        as[j] = s * zs[j] + t2 * z1[j] * z2[j];
      }
    }
  }
}

// Adjoints through the tanh mixing: given dL/da slots, produce dL/dz slots.
void activation_backward(const double* z, const double* a_stored,
                         const double* abar, int n, int width,
                         const SlotLayout& lay, double* zbar) {
  const int S = lay.count;
  const int pv = lay.at(slot_val);
  const int pt = lay.pos[slot_dt], px = lay.pos[slot_dx],
            pw = lay.pos[slot_dv];
  const int pxx = lay.pos[slot_dxx], pww = lay.pos[slot_dvv],
            ptx = lay.pos[slot_dtx];
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const std::size_t base = std::size_t(i) * S * width;
    auto row = [&](const double* p, int s) {
      return p + base + std::size_t(s) * width;
    };
    auto wrow = [&](double* p, int s) {
      return p + base + std::size_t(s) * width;
    };
    const double* av = row(a_stored, pv);
    const double* uv = row(abar, pv);
    double* bv = wrow(zbar, pv);
    for (int j = 0; j < width; ++j) {
      const double T = av[j];
      const double s = 1.0 - T * T;
      bv[j] = uv[j] * s;
    }
    auto chain1 = [&](int p) {
      if (p < 0) return;
      const double* zs = row(z, p);
      const double* us = row(abar, p);
      double* bs = wrow(zbar, p);
      for (int j = 0; j < width; ++j) {
        const double T = av[j];
        const double s = 1.0 - T * T;
        const double t2 = -2.0 * T * s;
        bs[j] = us[j] * s;
        bv[j] += us[j] * zs[j] * t2;
      }
    };
    chain1(pt);
    chain1(px);
    chain1(pw);
    auto chain2 = [&](int p, int p1) {
      if (p < 0) return;
      const double* zs = row(z, p);
      const double* z1 = row(z, p1);
      const double* us = row(abar, p);
      double* bs = wrow(zbar, p);
      double* b1 = wrow(zbar, p1);
      for (int j = 0; j < width; ++j) {
        const double T = av[j];
        const double s = 1.0 - T * T;
        const double t2 = -2.0 * T * s;
        const double t3 = 2.0 * s * (3.0 * T * T - 1.0);
        bs[j] = us[j] * s;
        b1[j] += us[j] * 2.0 * t2 * z1[j];
        bv[j] += us[j] * (zs[j] * t2 + z1[j] * z1[j] * t3);
      }
    };
    chain2(pxx, px);
    chain2(pww, pw);
    if (ptx >= 0) {
      const double* zs = row(z, ptx);
      const double* z1 = row(z, pt);
      const double* z2 = row(z, px);
      const double* us = row(abar, ptx);
      double* bs = wrow(zbar, ptx);
      double* b1 = wrow(zbar, pt);
      double* b2 = wrow(zbar, px);
      for (int j = 0; j < width; ++j) {
        const double T = av[j];
        const double s = 1.0 - T * T;
        const double t2 = -2.0 * T * s;
        const double t3 = 2.0 * s * (3.0 * T * T - 1.0);
        bs[j] = us[j] * s;
        b1[j] += us[j] * t2 * z2[j];
        b2[j] += us[j] * t2 * z1[j];
        bv[j] += us[j] * (zs[j] * t2 + z1[j] * z2[j] * t3);
      }
    }
  }
}

// abar[r][k] = sum_o zbar[r][o] W[o][k]
void affine_backward_data(const double* zbar, int rows, int out_w,
                          const double* W, int in_w, double* abar) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* zr = zbar + std::size_t(r) * out_w;
    double* ar = abar + std::size_t(r) * in_w;
    std::memset(ar, 0, sizeof(double) * in_w);
    for (int o = 0; o < out_w; ++o)
      axpy(ar, zr[o], W + std::size_t(o) * in_w, in_w);
  }
}

// Wbar[o][k] += sum_r zbar[r][o] a[r][k]; bbar[o] += value-row adjoints.
// Threads split the output rows; each walks r in batch order so the
// accumulation order per element never depends on the thread count.
void affine_backward_params(const double* zbar, const double* a, int rows,
                            int in_w, int out_w, const SlotLayout& lay,
                            double* Wbar, double* bbar) {
  const int S = lay.count;
  const int val = lay.at(slot_val);
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out_w; ++o) {
    double* wo = Wbar + std::size_t(o) * in_w;
    double bacc = 0.0;
    for (int r = 0; r < rows; ++r) {
      const double c = zbar[std::size_t(r) * out_w + o];
      if (c != 0.0) axpy(wo, c, a + std::size_t(r) * in_w, in_w);
      if ((r % S) == val) bacc += c;
    }
    bbar[o] += bacc;
  }
}

}  // namespace

int worker_count() {
  int n = g_workers.load();
  if (n > 0) return n;
  if (const char* env = std::getenv("APNN_THREADS")) {
    n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

void set_worker_count(int n) { g_workers.store(n); }

void forward_batch(const Mlp& net, const SlotLayout& lay, const double* in,
                   int n, EvalRecord& rec) {
  rec.net = &net;
  rec.lay = lay;
  rec.n = n;
  const int rows = n * lay.count;
  const int L = net.layers();
  rec.in.assign(in, in + std::size_t(rows) * net.widths[0]);
  rec.z.resize(L);
  rec.a.assign(L - 1, {});
  omp_set_num_threads(worker_count());
  const double* cur = rec.in.data();
  for (int l = 0; l < L; ++l) {
    const int w_in = net.widths[l];
    const int w_out = net.widths[l + 1];
    rec.z[l].resize(std::size_t(rows) * w_out);
    affine_forward(cur, rows, w_in, net.W(l), net.bias(l), w_out, lay,
                   rec.z[l].data());
    if (l + 1 < L) {
      rec.a[l].resize(std::size_t(rows) * w_out);
      activation_forward(rec.z[l].data(), n, w_out, lay, rec.a[l].data());
      cur = rec.a[l].data();
    }
  }
}

void backward_batch(const EvalRecord& rec, const double* out_adj,
                    double* grad) {
  const Mlp& net = *rec.net;
  const SlotLayout& lay = rec.lay;
  const int rows = rec.rows();
  const int L = net.layers();
  omp_set_num_threads(worker_count());
  std::vector<double> zbar(out_adj,
                           out_adj + std::size_t(rows) * net.widths[L]);
  std::vector<double> abar;
  for (int l = L - 1; l >= 0; --l) {
    const int w_in = net.widths[l];
    const int w_out = net.widths[l + 1];
    const double* a_prev = (l == 0) ? rec.in.data() : rec.a[l - 1].data();
    affine_backward_params(zbar.data(), a_prev, rows, w_in, w_out, lay,
                           grad + net.w_off[l], grad + net.b_off[l]);
    if (l == 0) break;
    abar.resize(std::size_t(rows) * w_in);
    affine_backward_data(zbar.data(), rows, w_out, net.W(l), w_in,
                         abar.data());
    zbar.resize(std::size_t(rows) * w_in);
    activation_backward(rec.z[l - 1].data(), rec.a[l - 1].data(), abar.data(),
                        rec.n, w_in, lay, zbar.data());
  }
}

namespace refk {

Jet forward_jet(const Mlp& net, const SlotLayout& lay, const Jet* in) {
  std::vector<Jet> cur(in, in + net.widths[0]);
  std::vector<Jet> next;
  for (int l = 0; l < net.layers(); ++l) {
    const int w_in = net.widths[l];
    const int w_out = net.widths[l + 1];
    next.assign(w_out, Jet{});
    for (int o = 0; o < w_out; ++o) {
      const double* wrow = net.W(l) + std::size_t(o) * w_in;
      Jet acc;
      acc.val = net.bias(l)[o];
      for (int k = 0; k < w_in; ++k) {
        acc.val += wrow[k] * cur[k].val;
        acc.dt += wrow[k] * cur[k].dt;
        acc.dx += wrow[k] * cur[k].dx;
        acc.dv += wrow[k] * cur[k].dv;
        acc.dxx += wrow[k] * cur[k].dxx;
        acc.dvv += wrow[k] * cur[k].dvv;
        acc.dtx += wrow[k] * cur[k].dtx;
      }
      if (l + 1 < net.layers()) {
        const double T = std::tanh(acc.val);
        const double s = 1.0 - T * T;
        const double t2 = -2.0 * T * s;
        Jet out;
        out.val = T;
        out.dt = s * acc.dt;
        out.dx = s * acc.dx;
        out.dv = s * acc.dv;
        out.dxx = s * acc.dxx + t2 * acc.dx * acc.dx;
        out.dvv = s * acc.dvv + t2 * acc.dv * acc.dv;
        out.dtx = s * acc.dtx + t2 * acc.dt * acc.dx;
        next[o] = out;
      } else {
        next[o] = acc;
      }
    }
    cur.swap(next);
  }
  Jet out = cur[0];
  for (int s = 0; s < n_slot_ids; ++s)
    if (!lay.has(SlotId(s))) out.by_id(s) = 0.0;
  return out;
}

double forward_value(const Mlp& net, const double* in) {
  std::vector<Jet> jin(net.widths[0]);
  for (int k = 0; k < net.widths[0]; ++k) jin[k].val = in[k];
  return forward_jet(net, SlotLayout::make(m_val), jin.data()).val;
}

}  // namespace refk

}
