#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

#include "apnn/errors.hpp"
#include "apnn/mlp.hpp"

using namespace apnn;

namespace {

std::string tmp_dir() {
  const char* base = std::getenv("APNN_TEST_TMP");
  std::filesystem::path p = base ? base : std::filesystem::temp_directory_path();
  p /= "mlp";
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("layout of a {3,5,2} network") {
  Mlp net = make_mlp({3, 5, 2}, Head::identity);
  CHECK(net.layers() == 2);
  CHECK(net.in_width() == 3);
  CHECK(net.out_width() == 2);
  // 3*5+5 + 5*2+2
  CHECK(net.n_params() == 32);
  CHECK(net.w_off[0] == 0);
  CHECK(net.b_off[0] == 15);
  CHECK(net.w_off[1] == 20);
  CHECK(net.b_off[1] == 30);
}

TEST_CASE("make_mlp rejects degenerate shapes") {
  CHECK_THROWS_AS(make_mlp({4}, Head::identity), config_error);
  CHECK_THROWS_AS(make_mlp({4, 8}, Head::identity), config_error);
  CHECK_THROWS_AS(make_mlp({4, 0, 1}, Head::identity), config_error);
  CHECK_THROWS_AS(make_mlp({-1, 8, 1}, Head::identity), config_error);
}

TEST_CASE("xavier_init is deterministic, bounded, zero-bias") {
  Mlp a = make_mlp({4, 16, 16, 1}, Head::softplus);
  Mlp b = make_mlp({4, 16, 16, 1}, Head::softplus);
  xavier_init(a, 42);
  xavier_init(b, 42);
  REQUIRE(a.params.size() == b.params.size());
  for (std::size_t i = 0; i < a.params.size(); ++i) CHECK(a.params[i] == b.params[i]);
  CHECK(a.seed == 42);

  Mlp c = make_mlp({4, 16, 16, 1}, Head::softplus);
  xavier_init(c, 43);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params.size(); ++i)
    if (a.params[i] != c.params[i]) any_diff = true;
  CHECK(any_diff);

  for (int l = 0; l < a.layers(); ++l) {
    const int fi = a.widths[l], fo = a.widths[l + 1];
    const double bound = std::sqrt(6.0 / (fi + fo));
    for (int i = 0; i < fo * fi; ++i) {
      CHECK(std::abs(a.W(l)[i]) <= bound);
    }
    double wmax = 0.0;
    for (int i = 0; i < fo * fi; ++i) wmax = std::max(wmax, std::abs(a.W(l)[i]));
    CHECK(wmax > 0.5 * bound);  // the draw actually fills the interval
    for (int i = 0; i < fo; ++i) CHECK(a.bias(l)[i] == 0.0);
  }
}

TEST_CASE("softplus identities") {
  for (double x : {-30.0, -4.0, -0.5, 0.0, 0.5, 4.0, 30.0, 700.0}) {
    // softplus(x) - softplus(-x) == x
    CHECK(softplus(x) - softplus(-x) == doctest::Approx(x).epsilon(1e-12));
    CHECK(softplus(x) >= 0.0);
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // no overflow on large input
  CHECK(std::isfinite(softplus(800.0)));
  CHECK(softplus(-800.0) >= 0.0);
}

TEST_CASE("checkpoint roundtrip is exact") {
  const std::string path = tmp_dir() + "/round.ckpt";
  Mlp net = make_mlp({3, 7, 7, 1}, Head::zero_mean_v);
  xavier_init(net, 1234);
  net.params[5] = -0.123456789012345678;  // not representable in fewer bits
  save_checkpoint(net, path, 777);

  std::uint64_t iter = 0;
  Mlp back = load_checkpoint(path, &iter);
  CHECK(iter == 777);
  CHECK(back.widths == net.widths);
  CHECK(back.head == net.head);
  CHECK(back.seed == net.seed);
  REQUIRE(back.params.size() == net.params.size());
  for (std::size_t i = 0; i < net.params.size(); ++i)
    CHECK(back.params[i] == net.params[i]);
}

TEST_CASE("checkpoint failure modes") {
  CHECK_THROWS_AS(load_checkpoint(tmp_dir() + "/does_not_exist.ckpt"), io_error);

  const std::string path = tmp_dir() + "/corrupt.ckpt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), io_error);

  // truncated parameter block
  const std::string trunc = tmp_dir() + "/trunc.ckpt";
  {
    Mlp net = make_mlp({2, 4, 1}, Head::identity);
    xavier_init(net, 9);
    save_checkpoint(net, trunc, 1);
    auto size = std::filesystem::file_size(trunc);
    std::filesystem::resize_file(trunc, size - 8);
  }
  CHECK_THROWS_AS(load_checkpoint(trunc), io_error);
}
