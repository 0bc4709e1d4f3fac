#include "apnn/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "apnn/errors.hpp"
#include "apnn/rng.hpp"

namespace apnn {

Mlp make_mlp(std::vector<int> widths, Head head) {
  if (widths.size() < 3)
    throw config_error("network needs input, hidden and output widths");
  for (int w : widths)
    if (w < 1) throw config_error("network widths must be positive");
  Mlp net;
  net.widths = std::move(widths);
  net.head = head;
  std::size_t total = 0;
  for (int l = 0; l < net.layers(); ++l) {
    net.w_off.push_back(total);
    total += std::size_t(net.widths[l]) * net.widths[l + 1];
    net.b_off.push_back(total);
    total += net.widths[l + 1];
  }
  net.params.assign(total, 0.0);
  return net;
}

void xavier_init(Mlp& net, std::uint64_t seed) {
  net.seed = seed;
  std::mt19937_64 eng(derive_seed(seed, 0x6e657473ull));
  for (int l = 0; l < net.layers(); ++l) {
    const int fan_in = net.widths[l];
    const int fan_out = net.widths[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    double* w = net.W(l);
    for (int i = 0; i < fan_in * fan_out; ++i)
      w[i] = uniform(eng, -bound, bound);
    std::memset(net.bias(l), 0, sizeof(double) * fan_out);
  }
}

double softplus(double x) {
  // log(1+exp(x)) overflows past ~709; for large x use x + log1p(exp(-x)).
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

constexpr char kMagic[8] = {'A', 'P', 'N', 'N', 'N', 'E', 'T', '1'};

struct FileCloser {
  std::FILE* f;
  ~FileCloser() {
    if (f) std::fclose(f);
  }
};

template <class T>
void write_one(std::FILE* f, const T& v) {
  if (std::fwrite(&v, sizeof(T), 1, f) != 1)
    throw io_error("checkpoint write failed");
}

template <class T>
T read_one(std::FILE* f, const char* what) {
  T v;
  if (std::fread(&v, sizeof(T), 1, f) != 1)
    throw io_error(std::string("checkpoint truncated reading ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const Mlp& net, const std::string& path,
                     std::uint64_t iteration) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw io_error("cannot open checkpoint for writing: " + path);
  FileCloser closer{f};
  if (std::fwrite(kMagic, 1, 8, f) != 8)
    throw io_error("checkpoint write failed");
  write_one<std::uint32_t>(f, std::uint32_t(net.head));
  write_one<std::uint32_t>(f, std::uint32_t(net.widths.size()));
  for (int w : net.widths) write_one<std::uint32_t>(f, std::uint32_t(w));
  write_one<std::uint64_t>(f, net.seed);
  write_one<std::uint64_t>(f, iteration);
  if (std::fwrite(net.params.data(), sizeof(double), net.params.size(), f) !=
      net.params.size())
    throw io_error("checkpoint write failed");
}

Mlp load_checkpoint(const std::string& path, std::uint64_t* iteration) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw io_error("cannot open checkpoint: " + path);
  FileCloser closer{f};
  char magic[8];
  if (std::fread(magic, 1, 8, f) != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw io_error("not a network checkpoint: " + path);
  const auto head = read_one<std::uint32_t>(f, "head");
  if (head > 2) throw io_error("checkpoint has unknown head id");
  const auto n_widths = read_one<std::uint32_t>(f, "width count");
  if (n_widths < 3 || n_widths > 64)
    throw io_error("checkpoint width count out of range");
  std::vector<int> widths(n_widths);
  for (auto& w : widths) {
    w = int(read_one<std::uint32_t>(f, "width"));
    if (w < 1 || w > 65536) throw io_error("checkpoint width out of range");
  }
  const auto seed = read_one<std::uint64_t>(f, "seed");
  const auto iter = read_one<std::uint64_t>(f, "iteration");
  Mlp net = make_mlp(std::move(widths), Head(head));
  net.seed = seed;
  if (std::fread(net.params.data(), sizeof(double), net.params.size(), f) !=
      net.params.size())
    throw io_error("checkpoint truncated reading parameters");
  if (iteration) *iteration = iter;
  return net;
}

}
