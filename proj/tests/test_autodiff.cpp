#include <cmath>
#include <vector>

#include "doctest.h"

#include "apnn/kernels.hpp"
#include "apnn/physics.hpp"
#include "apnn/rng.hpp"

using namespace apnn;

namespace {

constexpr unsigned kAllSlots =
    m_val | m_dt | m_dx | m_dv | m_dxx | m_dvv | m_dtx;

struct Batch {
  FourierFeatures ff;
  bool has_v;
  int nz;
  int n;
  std::vector<double> t, x, v, z;
};

Batch make_points(const FourierFeatures& ff, bool has_v, int nz, int n,
                  std::uint64_t seed) {
  Batch b{ff, has_v, nz, n, {}, {}, {}, {}};
  std::mt19937_64 eng(seed);
  for (int i = 0; i < n; ++i) {
    b.t.push_back(uniform(eng, 0.0, 1.0));
    b.x.push_back(uniform(eng, -2.0, 9.0));
    b.v.push_back(uniform(eng, -6.0, 6.0));
    for (int m = 0; m < nz; ++m) b.z.push_back(uniform(eng, -1.0, 1.0));
  }
  return b;
}

void run_forward(const Mlp& net, const SlotLayout& lay, const Batch& b,
                 EvalRecord& rec) {
  const int w0 = input_width(b.ff, b.has_v, b.nz);
  std::vector<double> rows(std::size_t(b.n) * lay.count * w0);
  seed_rows(b.ff, b.has_v, b.nz, lay, b.t.data(), b.x.data(),
            b.has_v ? b.v.data() : nullptr, b.nz ? b.z.data() : nullptr, b.n,
            rows.data());
  forward_batch(net, lay, rows.data(), b.n, rec);
}

}  // namespace

TEST_CASE("seed_rows lays out the same jets as build_input_jets") {
  FourierFeatures ff{0.5, 2};
  const int nz = 3;
  const int w0 = input_width(ff, true, nz);
  CHECK(w0 == 1 + 4 + 1 + nz);
  const SlotLayout lay = SlotLayout::make(kAllSlots);

  Batch b = make_points(ff, true, nz, 4, 11);
  std::vector<double> rows(std::size_t(b.n) * lay.count * w0);
  seed_rows(ff, true, nz, lay, b.t.data(), b.x.data(), b.v.data(), b.z.data(),
            b.n, rows.data());

  std::vector<Jet> jets(w0);
  for (int i = 0; i < b.n; ++i) {
    build_input_jets(ff, true, nz, b.t[i], b.x[i], b.v[i], b.z.data() + i * nz,
                     jets.data());
    for (int s = 0; s < n_slot_ids; ++s) {
      if (!lay.has(SlotId(s))) continue;
      const double* row = rows.data() + (std::size_t(i) * lay.count + lay.at(SlotId(s))) * w0;
      for (int j = 0; j < w0; ++j) CHECK(row[j] == jets[j].by_id(s));
    }
  }
}

TEST_CASE("batched forward agrees with the per-sample reference") {
  struct Case {
    bool has_v;
    int nz;
    std::vector<int> widths;
  };
  const Case cases[] = {
      {false, 0, {3, 14, 14, 1}},
      {true, 0, {4, 18, 10, 1}},
      {true, 2, {6, 12, 12, 1}},
  };
  const SlotLayout lay = SlotLayout::make(kAllSlots);
  FourierFeatures ff{2.0, 1};

  for (const Case& c : cases) {
    Mlp net = make_mlp(c.widths, Head::identity);
    xavier_init(net, 7 + c.nz);
    REQUIRE(net.in_width() == input_width(ff, c.has_v, c.nz));

    Batch b = make_points(ff, c.has_v, c.nz, 17, 23);
    EvalRecord rec;
    run_forward(net, lay, b, rec);

    std::vector<Jet> in(net.in_width());
    for (int i = 0; i < b.n; ++i) {
      build_input_jets(ff, c.has_v, c.nz, b.t[i], b.x[i],
                       c.has_v ? b.v[i] : 0.0,
                       c.nz ? b.z.data() + i * c.nz : nullptr, in.data());
      const Jet ref = refk::forward_jet(net, lay, in.data());
      for (int s = 0; s < n_slot_ids; ++s) {
        if (!lay.has(SlotId(s))) continue;
        const double got = rec.out()[std::size_t(i) * lay.count + lay.at(SlotId(s))];
        const double scale = std::max(1.0, std::abs(ref.by_id(s)));
        CHECK(std::abs(got - ref.by_id(s)) <= 1e-13 * scale);
      }
    }
  }
}

TEST_CASE("networks without a velocity input have exactly zero dv") {
  FourierFeatures ff{1.0, 2};
  Mlp net = make_mlp({6, 16, 1}, Head::identity);
  xavier_init(net, 5);
  const SlotLayout lay = SlotLayout::make(m_val | m_dv | m_dvv);

  Batch b = make_points(ff, false, 1, 9, 31);
  EvalRecord rec;
  run_forward(net, lay, b, rec);
  for (int i = 0; i < b.n; ++i) {
    CHECK(rec.out()[std::size_t(i) * lay.count + lay.at(slot_dv)] == 0.0);
    CHECK(rec.out()[std::size_t(i) * lay.count + lay.at(slot_dvv)] == 0.0);
  }
}

TEST_CASE("forward and backward are bit-identical across worker counts") {
  FourierFeatures ff{0.5, 1};
  Mlp net = make_mlp({4, 24, 24, 1}, Head::identity);
  xavier_init(net, 99);
  const SlotLayout lay = SlotLayout::make(kAllSlots);
  Batch b = make_points(ff, true, 0, 33, 47);

  // fixed pseudo-random output adjoints
  std::vector<double> adj(std::size_t(b.n) * lay.count);
  std::mt19937_64 eng(3);
  for (double& a : adj) a = uniform(eng, -1.0, 1.0);

  const int saved = worker_count();
  std::vector<double> out1, grad1;
  for (int workers : {1, 3, 7}) {
    set_worker_count(workers);
    EvalRecord rec;
    run_forward(net, lay, b, rec);
    std::vector<double> grad(net.n_params(), 0.0);
    backward_batch(rec, adj.data(), grad.data());
    std::vector<double> out(rec.out(), rec.out() + rec.rows());
    if (workers == 1) {
      out1 = out;
      grad1 = grad;
    } else {
      REQUIRE(out.size() == out1.size());
      for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == out1[i]);
      for (std::size_t i = 0; i < grad.size(); ++i) CHECK(grad[i] == grad1[i]);
    }
  }
  set_worker_count(saved);
}

TEST_CASE("parameter gradients match finite differences") {
  FourierFeatures ff{1.0, 1};
  Mlp net = make_mlp({5, 6, 1}, Head::identity);
  xavier_init(net, 17);
  const SlotLayout lay = SlotLayout::make(kAllSlots);
  Batch b = make_points(ff, true, 1, 3, 53);

  std::vector<double> adj(std::size_t(b.n) * lay.count);
  std::mt19937_64 eng(8);
  for (double& a : adj) a = uniform(eng, -1.0, 1.0);

  auto loss = [&]() {
    EvalRecord rec;
    run_forward(net, lay, b, rec);
    double s = 0;
    for (int r = 0; r < rec.rows(); ++r) s += adj[r] * rec.out()[r];
    return s;
  };

  EvalRecord rec;
  run_forward(net, lay, b, rec);
  std::vector<double> grad(net.n_params(), 0.0);
  backward_batch(rec, adj.data(), grad.data());

  const double h = 1e-6;
  for (std::size_t p = 0; p < net.n_params(); ++p) {
    const double keep = net.params[p];
    net.params[p] = keep + h;
    const double up = loss();
    net.params[p] = keep - h;
    const double dn = loss();
    net.params[p] = keep;
    const double fd = (up - dn) / (2 * h);
    CHECK(std::abs(fd - grad[p]) <= 2e-6 * std::max(1.0, std::abs(grad[p])));
  }
}

TEST_CASE("backward_batch accumulates into grad") {
  FourierFeatures ff{1.0, 1};
  Mlp net = make_mlp({4, 8, 1}, Head::identity);
  xavier_init(net, 21);
  const SlotLayout lay = SlotLayout::make(m_val | m_dx);
  Batch b = make_points(ff, true, 0, 5, 61);

  std::vector<double> adj(std::size_t(b.n) * lay.count, 0.5);
  EvalRecord rec;
  run_forward(net, lay, b, rec);

  std::vector<double> once(net.n_params(), 0.0);
  backward_batch(rec, adj.data(), once.data());
  std::vector<double> twice(net.n_params(), 0.0);
  backward_batch(rec, adj.data(), twice.data());
  backward_batch(rec, adj.data(), twice.data());
  // the second pass extends the running sums, so doubling holds only up to
  // reassociation roundoff
  for (std::size_t i = 0; i < once.size(); ++i)
    CHECK(twice[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
}
