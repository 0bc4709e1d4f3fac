#include "apnn/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "apnn/errors.hpp"

namespace apnn {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

struct Ini {
  // section -> key -> entry; first assignment wins a duplicate-key error
  std::map<std::string, std::map<std::string, Entry>> sections;

  Entry* find(const std::string& sec, const std::string& key) {
    auto s = sections.find(sec);
    if (s == sections.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.used = true;
    return &k->second;
  }
};

const char* const kSections[] = {"problem",   "method",   "nets",
                                 "batches",   "penalties", "training",
                                 "quadrature", "reference"};

bool known_section(const std::string& s) {
  for (const char* k : kSections)
    if (s == k) return true;
  return false;
}

[[noreturn]] void bad(const std::string& what, int line) {
  std::ostringstream os;
  os << what << " at line " << line;
  throw config_error(os.str());
}

Ini parse_ini(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  Ini ini;
  std::string cur, raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') bad("unterminated section header", line);
      cur = trim(s.substr(1, s.size() - 2));
      if (!known_section(cur)) bad("unknown section [" + cur + "]", line);
      ini.sections[cur];
      continue;
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) bad("expected key = value", line);
    if (cur.empty()) bad("key outside any section", line);
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    if (key.empty()) bad("empty key", line);
    auto& sec = ini.sections[cur];
    if (sec.count(key)) bad("duplicate key '" + key + "'", line);
    sec[key] = Entry{val, line, false};
  }
  return ini;
}

double to_double(const Entry& e, const std::string& key) {
  const char* c = e.value.c_str();
  char* end = nullptr;
  double v = std::strtod(c, &end);
  if (end == c || *end != '\0')
    bad("value of '" + key + "' is not a number", e.line);
  return v;
}

int to_int(const Entry& e, const std::string& key) {
  const char* c = e.value.c_str();
  char* end = nullptr;
  long v = std::strtol(c, &end, 10);
  if (end == c || *end != '\0')
    bad("value of '" + key + "' is not an integer", e.line);
  return int(v);
}

std::uint64_t to_u64(const Entry& e, const std::string& key) {
  const char* c = e.value.c_str();
  char* end = nullptr;
  unsigned long long v = std::strtoull(c, &end, 10);
  if (end == c || *end != '\0')
    bad("value of '" + key + "' is not an unsigned integer", e.line);
  return v;
}

std::vector<double> to_doubles(const Entry& e, const std::string& key) {
  std::istringstream is(e.value);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      bad("value of '" + key + "' is not a number list", e.line);
    out.push_back(v);
  }
  if (out.empty()) bad("value of '" + key + "' is empty", e.line);
  return out;
}

std::vector<int> to_ints(const Entry& e, const std::string& key) {
  std::vector<int> out;
  for (double v : to_doubles(e, key)) {
    if (v != double(int(v)))
      bad("value of '" + key + "' is not an integer list", e.line);
    out.push_back(int(v));
  }
  return out;
}

struct Reader {
  Ini& ini;
  void num(const char* sec, const char* key, double& dst) {
    if (Entry* e = ini.find(sec, key)) dst = to_double(*e, key);
  }
  void integer(const char* sec, const char* key, int& dst) {
    if (Entry* e = ini.find(sec, key)) dst = to_int(*e, key);
  }
  void u64(const char* sec, const char* key, std::uint64_t& dst) {
    if (Entry* e = ini.find(sec, key)) dst = to_u64(*e, key);
  }
  void text(const char* sec, const char* key, std::string& dst) {
    if (Entry* e = ini.find(sec, key)) dst = e->value;
  }
  void nums(const char* sec, const char* key, std::vector<double>& dst) {
    if (Entry* e = ini.find(sec, key)) dst = to_doubles(*e, key);
  }
  void ints(const char* sec, const char* key, std::vector<int>& dst) {
    if (Entry* e = ini.find(sec, key)) dst = to_ints(*e, key);
  }
};

}  // namespace

void RunConfig::validate() const {
  batches.validate();
  penalties.validate();
  training.validate();
  if (quad_points < 1) throw config_error("quadrature points must be >= 1");
  if (fourier_terms < 1) throw config_error("fourier terms must be >= 1");
  if (scalar_hidden.empty() || kinetic_hidden.empty())
    throw config_error("hidden widths must not be empty");
  for (int w : scalar_hidden)
    if (w < 1) throw config_error("hidden widths must be >= 1");
  for (int w : kinetic_hidden)
    if (w < 1) throw config_error("hidden widths must be >= 1");
  if (ref_nx < 4 || ref_nv < 4)
    throw config_error("reference grid needs nx >= 4 and nv >= 4");
  if (!(cfl > 0.0) || cfl > 1.0)
    throw config_error("cfl must lie in (0, 1]");
  if (ref_kind != "kinetic" && ref_kind != "limit" && ref_kind != "both")
    throw config_error("reference kind must be kinetic, limit, or both");
  if (z_draws < 1) throw config_error("z draw count must be >= 1");
  if (t_final < 0.0) throw config_error("t_final must be >= 0");
  for (double t : times)
    if (t < 0.0) throw config_error("snapshot times must be >= 0");
  if (times.empty()) throw config_error("at least one snapshot time is needed");
}

ProblemSetup RunConfig::setup() const {
  ProblemSetup ps = make_problem(problem, eps0);
  if (t_final > 0.0) ps.loss.t_final = t_final;
  ps.ff.n = fourier_terms;
  if (!times.empty()) ps.eval_times = times;
  return ps;
}

RunConfig default_config(ProblemId id, Method m, double eps0) {
  RunConfig c;
  c.problem = id;
  c.method = m;
  c.eps0 = eps0;
  c.scalar_hidden = default_scalar_widths(id);
  c.kinetic_hidden = default_kinetic_widths(id);
  c.penalties = default_penalties(id, m, eps0);
  c.batches = default_batches(id, m);
  c.times = make_problem(id, eps0).eval_times;
  c.training.seed = 1;
  return c;
}

RunConfig load_config(const std::string& path) {
  Ini ini = parse_ini(path);

  // id, eps, and method pick the defaults everything else overrides.
  ProblemId id = ProblemId::landau;
  Method m = Method::micro_macro;
  if (Entry* e = ini.find("problem", "id")) {
    try {
      id = parse_problem(e->value);
    } catch (const config_error&) {
      bad("unknown problem '" + e->value + "'", e->line);
    }
  }
  double eps0 = default_eps(id);
  if (Entry* e = ini.find("problem", "eps")) eps0 = to_double(*e, "eps");
  if (Entry* e = ini.find("method", "name")) {
    try {
      m = parse_method(e->value);
    } catch (const config_error&) {
      bad("unknown method '" + e->value + "'", e->line);
    }
  }

  RunConfig c = default_config(id, m, eps0);
  Reader r{ini};
  r.num("problem", "t_final", c.t_final);

  r.ints("nets", "scalar_hidden", c.scalar_hidden);
  r.ints("nets", "kinetic_hidden", c.kinetic_hidden);
  r.integer("nets", "fourier_terms", c.fourier_terms);

  r.integer("batches", "domain", c.batches.n_domain);
  r.integer("batches", "initial", c.batches.n_ic);
  r.integer("batches", "boundary", c.batches.n_bc);
  r.integer("batches", "conservation", c.batches.n_conservation);

  r.num("penalties", "domain_macro", c.penalties.domain_macro);
  r.num("penalties", "domain_kinetic", c.penalties.domain_kinetic);
  r.num("penalties", "domain_poisson", c.penalties.domain_poisson);
  r.num("penalties", "bc_rho", c.penalties.bc_rho);
  r.num("penalties", "bc_gf", c.penalties.bc_gf);
  r.num("penalties", "bc_phi", c.penalties.bc_phi);
  r.num("penalties", "ic_rho", c.penalties.ic_rho);
  r.num("penalties", "ic_gf", c.penalties.ic_gf);
  r.num("penalties", "ic_phi", c.penalties.ic_phi);
  r.num("penalties", "conservation", c.penalties.conservation);

  r.num("training", "lr", c.training.adam.lr);
  r.num("training", "beta1", c.training.adam.beta1);
  r.num("training", "beta2", c.training.adam.beta2);
  r.num("training", "eps_hat", c.training.adam.eps_hat);
  r.integer("training", "max_iters", c.training.max_iters);
  r.integer("training", "resample_every", c.training.resample_every);
  r.integer("training", "checkpoint_every", c.training.checkpoint_every);
  r.integer("training", "log_every", c.training.log_every);
  r.u64("training", "seed", c.training.seed);

  r.integer("quadrature", "points", c.quad_points);

  r.integer("reference", "nx", c.ref_nx);
  r.integer("reference", "nv", c.ref_nv);
  r.num("reference", "cfl", c.cfl);
  r.text("reference", "kind", c.ref_kind);
  r.nums("reference", "times", c.times);
  r.integer("reference", "z_draws", c.z_draws);

  for (const auto& sec : ini.sections)
    for (const auto& kv : sec.second)
      if (!kv.second.used)
        bad("unknown key '" + kv.first + "' in [" + sec.first + "]",
            kv.second.line);

  c.validate();
  return c;
}

std::string config_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["problem"]["id"] = problem_name(cfg.problem);
  j["problem"]["eps"] = cfg.eps0;
  j["problem"]["t_final"] = cfg.setup().loss.t_final;
  j["problem"]["field_gradient"] = cfg.problem == ProblemId::gravitational;
  j["method"]["name"] = method_name(cfg.method);
  j["nets"]["scalar_hidden"] = cfg.scalar_hidden;
  j["nets"]["kinetic_hidden"] = cfg.kinetic_hidden;
  j["nets"]["fourier_terms"] = cfg.fourier_terms;
  j["batches"]["domain"] = cfg.batches.n_domain;
  j["batches"]["initial"] = cfg.batches.n_ic;
  j["batches"]["boundary"] = cfg.batches.n_bc;
  j["batches"]["conservation"] = cfg.batches.n_conservation;
  j["penalties"]["domain_macro"] = cfg.penalties.domain_macro;
  j["penalties"]["domain_kinetic"] = cfg.penalties.domain_kinetic;
  j["penalties"]["domain_poisson"] = cfg.penalties.domain_poisson;
  j["penalties"]["bc_rho"] = cfg.penalties.bc_rho;
  j["penalties"]["bc_gf"] = cfg.penalties.bc_gf;
  j["penalties"]["bc_phi"] = cfg.penalties.bc_phi;
  j["penalties"]["ic_rho"] = cfg.penalties.ic_rho;
  j["penalties"]["ic_gf"] = cfg.penalties.ic_gf;
  j["penalties"]["ic_phi"] = cfg.penalties.ic_phi;
  j["penalties"]["conservation"] = cfg.penalties.conservation;
  j["training"]["lr"] = cfg.training.adam.lr;
  j["training"]["beta1"] = cfg.training.adam.beta1;
  j["training"]["beta2"] = cfg.training.adam.beta2;
  j["training"]["eps_hat"] = cfg.training.adam.eps_hat;
  j["training"]["max_iters"] = cfg.training.max_iters;
  j["training"]["resample_every"] = cfg.training.resample_every;
  j["training"]["checkpoint_every"] = cfg.training.checkpoint_every;
  j["training"]["log_every"] = cfg.training.log_every;
  j["training"]["seed"] = cfg.training.seed;
  j["quadrature"]["points"] = cfg.quad_points;
  j["reference"]["nx"] = cfg.ref_nx;
  j["reference"]["nv"] = cfg.ref_nv;
  j["reference"]["cfl"] = cfg.cfl;
  j["reference"]["kind"] = cfg.ref_kind;
  j["reference"]["times"] = cfg.times;
  j["reference"]["z_draws"] = cfg.z_draws;
  return j.dump(2);
}

}  // namespace apnn
