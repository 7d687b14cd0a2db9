#include <bicopter/run_config.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include <bicopter/io.hpp>

namespace bicopter::cfg {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kPi = 3.14159265358979323846;

std::string trim(const std::string& s) {
  const auto from = s.find_first_not_of(" \t");
  if (from == std::string::npos) return "";
  const auto to = s.find_last_not_of(" \t");
  return s.substr(from, to - from + 1);
}

struct KeyContext {
  const std::string& path;
  long line;
  const std::string& section;
  const std::string& key;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(path + ":" + std::to_string(line) + ": key '" + key +
                      "' in [" + section + "] " + msg);
  }
};

double parse_double(const KeyContext& c, const std::string& v) {
  double out = 0.0;
  if (!io::try_parse_double(v, out)) {
    c.fail("expects a number, got '" + v + "'");
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = value.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(value.substr(start)));
      return out;
    }
    out.push_back(trim(value.substr(start, pos - start)));
    start = pos + 1;
  }
}

VectorXd parse_vector(const KeyContext& c, const std::string& v, long n) {
  const std::vector<std::string> f = split_csv(v);
  if (static_cast<long>(f.size()) != n) {
    c.fail("expects " + std::to_string(n) + " comma-separated values, got " +
           std::to_string(f.size()));
  }
  VectorXd out(n);
  for (long i = 0; i < n; ++i) {
    if (!io::try_parse_double(f[i], out[i])) {
      c.fail("has bad number '" + f[i] + "'");
    }
  }
  return out;
}

// A single scalar means scalar * identity; otherwise the full n*n row-major
// entry list.
MatrixXd parse_weight(const KeyContext& c, const std::string& v, long n) {
  const std::vector<std::string> f = split_csv(v);
  if (f.size() == 1) {
    double s = 0.0;
    if (!io::try_parse_double(f[0], s)) c.fail("has bad number '" + f[0] + "'");
    return s * MatrixXd::Identity(n, n);
  }
  if (static_cast<long>(f.size()) != n * n) {
    c.fail("expects 1 or " + std::to_string(n * n) + " values, got " +
           std::to_string(f.size()));
  }
  MatrixXd m(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) {
      if (!io::try_parse_double(f[i * n + j], m(i, j))) {
        c.fail("has bad number '" + f[i * n + j] + "'");
      }
    }
  }
  return m;
}

long parse_int(const KeyContext& c, const std::string& v) {
  long out = 0;
  if (!io::try_parse_long(v, out)) c.fail("expects an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const KeyContext& c, const std::string& v) {
  std::uint64_t out = 0;
  if (!io::try_parse_u64(v, out)) {
    c.fail("expects an unsigned integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const KeyContext& c, const std::string& v) {
  if (v == "0" || v == "false") return false;
  if (v == "1" || v == "true") return true;
  c.fail("expects 0/1/true/false, got '" + v + "'");
}

void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

void check_weight(const MatrixXd& m, const std::string& name, bool strict) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  check((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale,
        name + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  const double floor = strict ? 1e-12 * scale : -1e-9 * scale;
  check(es.eigenvalues().minCoeff() > floor,
        name + (strict ? " must be positive definite"
                       : " must be positive semidefinite"));
}

}  // namespace

RunConfig default_config() {
  RunConfig c;
  const double inf = std::numeric_limits<double>::infinity();

  c.problem.model = trajopt::bicopter_model(c.plant);
  c.problem.x_i = VectorXd::Zero(6);
  c.problem.x_f = VectorXd::Zero(6);
  c.problem.x_f[bicopter::kR2] = 3.0;
  c.problem.x_f[bicopter::kPsi] = 2.0 * kPi;
  c.problem.u_f = VectorXd(2);
  c.problem.u_f << c.plant.g, 0.0;
  c.problem.N = 400;
  c.problem.Q_x = 100.0 * MatrixXd::Identity(6, 6);
  c.problem.Q_u = 100.0 * MatrixXd::Identity(2, 2);
  c.problem.x_lo = VectorXd::Constant(6, -inf);
  c.problem.x_hi = VectorXd::Constant(6, inf);
  c.problem.x_lo[bicopter::kR1] = -1.0;
  c.problem.x_hi[bicopter::kR1] = 1.0;
  c.problem.x_lo[bicopter::kR2] = 0.0;
  c.problem.x_hi[bicopter::kR2] = 3.0;
  c.problem.u_lo = VectorXd(2);
  c.problem.u_lo << 1.0, -15.0;
  c.problem.u_hi = VectorXd(2);
  c.problem.u_hi << 20.0, 15.0;
  c.problem.T_init = 10.0;
  c.problem.T_min = 0.1;

  // Inner-solver caps sized so the N = 400 transcription converges; the
  // remaining solver fields keep the library defaults.
  c.solver.max_inner = 20000;
  c.solver.lbfgs_memory = 30;

  c.weights.R1 = MatrixXd::Identity(6, 6);
  c.weights.R2 = MatrixXd::Identity(2, 2);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open for reading");

  RunConfig c = default_config();
  bool g_set = false;
  bool u_f_set = false;

  std::string raw;
  std::string section;
  long line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(path + ":" + std::to_string(line_no) +
                          ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "plant" && section != "problem" && section != "solver" &&
          section != "lqr" && section != "arma" && section != "fuzzy" &&
          section != "sim") {
        throw ConfigError(path + ":" + std::to_string(line_no) +
                          ": unknown section [" + section + "]");
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": key '" +
                        key + "' appears before any [section]");
    }
    const KeyContext kc{path, line_no, section, key};

    if (section == "plant") {
      if (key == "g") {
        c.plant.g = parse_double(kc, value);
        g_set = true;
      } else if (key == "m") {
        c.plant.m = parse_double(kc, value);
      } else if (key == "J") {
        c.plant.J = parse_double(kc, value);
      } else {
        kc.fail("is not recognized");
      }
    } else if (section == "problem") {
      if (key == "x_i") {
        c.problem.x_i = parse_vector(kc, value, 6);
      } else if (key == "x_f") {
        c.problem.x_f = parse_vector(kc, value, 6);
      } else if (key == "u_f") {
        c.problem.u_f = parse_vector(kc, value, 2);
        u_f_set = true;
      } else if (key == "N") {
        c.problem.N = static_cast<int>(parse_int(kc, value));
      } else if (key == "Q_x") {
        c.problem.Q_x = parse_weight(kc, value, 6);
      } else if (key == "Q_u") {
        c.problem.Q_u = parse_weight(kc, value, 2);
      } else if (key == "x_lo") {
        c.problem.x_lo = parse_vector(kc, value, 6);
      } else if (key == "x_hi") {
        c.problem.x_hi = parse_vector(kc, value, 6);
      } else if (key == "u_lo") {
        c.problem.u_lo = parse_vector(kc, value, 2);
      } else if (key == "u_hi") {
        c.problem.u_hi = parse_vector(kc, value, 2);
      } else if (key == "T_init") {
        c.problem.T_init = parse_double(kc, value);
      } else if (key == "T_min") {
        c.problem.T_min = parse_double(kc, value);
      } else {
        kc.fail("is not recognized");
      }
    } else if (section == "solver") {
      if (key == "eq_tol") {
        c.solver.eq_tol = parse_double(kc, value);
      } else if (key == "stat_tol") {
        c.solver.stat_tol = parse_double(kc, value);
      } else if (key == "max_outer") {
        c.solver.max_outer = static_cast<int>(parse_int(kc, value));
      } else if (key == "max_inner") {
        c.solver.max_inner = static_cast<int>(parse_int(kc, value));
      } else if (key == "penalty_init") {
        c.solver.penalty_init = parse_double(kc, value);
      } else if (key == "penalty_scale") {
        c.solver.penalty_scale = parse_double(kc, value);
      } else if (key == "penalty_max") {
        c.solver.penalty_max = parse_double(kc, value);
      } else if (key == "viol_drop") {
        c.solver.viol_drop = parse_double(kc, value);
      } else if (key == "omega_init") {
        c.solver.omega_init = parse_double(kc, value);
      } else if (key == "omega_scale") {
        c.solver.omega_scale = parse_double(kc, value);
      } else if (key == "lbfgs_memory") {
        c.solver.lbfgs_memory = static_cast<int>(parse_int(kc, value));
      } else {
        kc.fail("is not recognized");
      }
    } else if (section == "lqr") {
      if (key == "R1") {
        c.weights.R1 = parse_weight(kc, value, 6);
      } else if (key == "R2") {
        c.weights.R2 = parse_weight(kc, value, 2);
      } else {
        kc.fail("is not recognized");
      }
    } else if (section == "arma") {
      if (key == "n_runs") {
        c.arma.n_runs = static_cast<int>(parse_int(kc, value));
      } else if (key == "l_w") {
        c.arma.l_w = static_cast<int>(parse_int(kc, value));
      } else if (key == "ridge") {
        c.arma.ridge = parse_double(kc, value);
      } else if (key == "seed") {
        c.arma.seed = parse_u64(kc, value);
      } else if (key == "ic_halfwidth") {
        c.arma.ic_halfwidth = parse_double(kc, value);
      } else if (key == "position_emits_both") {
        c.arma.position_emits_both = parse_bool(kc, value);
      } else {
        kc.fail("is not recognized");
      }
    } else if (section == "fuzzy") {
      if (key == "gamma_lo") {
        c.fuzzy.gamma_lo = parse_double(kc, value);
      } else if (key == "gamma_hi") {
        c.fuzzy.gamma_hi = parse_double(kc, value);
      } else if (key == "gamma_lo_deg") {
        c.fuzzy.gamma_lo = parse_double(kc, value) * kPi / 180.0;
      } else if (key == "gamma_hi_deg") {
        c.fuzzy.gamma_hi = parse_double(kc, value) * kPi / 180.0;
      } else {
        kc.fail("is not recognized");
      }
    } else {  // sim
      if (key == "T_s") {
        c.sim.T_s = parse_double(kc, value);
      } else if (key == "h") {
        c.sim.h = parse_double(kc, value);
      } else if (key == "horizon") {
        c.sim.horizon = parse_double(kc, value);
      } else {
        kc.fail("is not recognized");
      }
    }
  }

  // The hover input tracks gravity unless the file pins u_f itself.
  if (g_set && !u_f_set) c.problem.u_f << c.plant.g, 0.0;
  c.problem.model = trajopt::bicopter_model(c.plant);

  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  check(c.plant.g > 0.0, "[plant] g must be > 0");
  check(c.plant.m > 0.0, "[plant] m must be > 0");
  check(c.plant.J > 0.0, "[plant] J must be > 0");

  try {
    trajopt::validate(c.problem);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: [problem] ") + e.what());
  }

  check(c.solver.eq_tol > 0.0, "[solver] eq_tol must be > 0");
  check(c.solver.stat_tol > 0.0, "[solver] stat_tol must be > 0");
  check(c.solver.max_outer >= 1, "[solver] max_outer must be >= 1");
  check(c.solver.max_inner >= 1, "[solver] max_inner must be >= 1");
  check(c.solver.penalty_init > 0.0, "[solver] penalty_init must be > 0");
  check(c.solver.penalty_scale > 1.0, "[solver] penalty_scale must be > 1");
  check(c.solver.penalty_max >= c.solver.penalty_init,
        "[solver] penalty_max must be >= penalty_init");
  check(c.solver.viol_drop > 1.0, "[solver] viol_drop must be > 1");
  check(c.solver.omega_init > 0.0, "[solver] omega_init must be > 0");
  check(c.solver.omega_scale > 0.0 && c.solver.omega_scale < 1.0,
        "[solver] omega_scale must be in (0, 1)");
  check(c.solver.lbfgs_memory >= 1, "[solver] lbfgs_memory must be >= 1");

  check(c.weights.R1.rows() == 6 && c.weights.R1.cols() == 6,
        "[lqr] R1 must be 6x6");
  check(c.weights.R2.rows() == 2 && c.weights.R2.cols() == 2,
        "[lqr] R2 must be 2x2");
  check_weight(c.weights.R1, "[lqr] R1", false);
  check_weight(c.weights.R2, "[lqr] R2", true);

  check(c.arma.n_runs >= 0, "[arma] n_runs must be >= 0");
  check(c.arma.l_w >= 1, "[arma] l_w must be >= 1");
  check(c.arma.ridge >= 0.0, "[arma] ridge must be >= 0");
  check(c.arma.ic_halfwidth >= 0.0, "[arma] ic_halfwidth must be >= 0");

  try {
    fuzzy::validate(c.fuzzy);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: [fuzzy] ") + e.what());
  }

  check(c.sim.T_s > 0.0, "[sim] T_s must be > 0");
  check(c.sim.h > 0.0, "[sim] h must be > 0");
  check(c.sim.horizon > 0.0, "[sim] horizon must be > 0");
}

}  // namespace bicopter::cfg
