#include <bicopter/io.hpp>

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <vector>

namespace bicopter::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool try_parse_double(const std::string& s, double& out) {
  if (s.empty() || std::isspace(static_cast<unsigned char>(s.front()))) {
    return false;
  }
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  if (errno == ERANGE && std::isinf(v)) return false;  // overflow, not "inf"
  out = v;
  return true;
}

bool try_parse_long(const std::string& s, long& out) {
  if (s.empty() || std::isspace(static_cast<unsigned char>(s.front()))) {
    return false;
  }
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) return false;
  out = v;
  return true;
}

bool try_parse_u64(const std::string& s, std::uint64_t& out) {
  if (s.empty() || s.front() == '-' ||
      std::isspace(static_cast<unsigned char>(s.front()))) {
    return false;
  }
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) return false;
  out = v;
  return true;
}

namespace {

using Eigen::MatrixXd;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw IoError(path + ": " + msg);
}

[[noreturn]] void fail_line(const std::string& path, long line,
                            const std::string& msg) {
  throw IoError(path + ":" + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string join_doubles(const double* v, long n) {
  std::string out;
  for (long i = 0; i < n; ++i) {
    if (i > 0) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) fail(path_, "cannot open for reading");
  }

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no_;
    return true;
  }

  long line_no() const { return line_no_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  long line_no_ = 0;
};

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path) {
    if (!out_) fail(path_, "cannot open for writing");
  }

  Writer& operator<<(const std::string& s) {
    out_ << s;
    return *this;
  }
  Writer& operator<<(char c) {
    out_ << c;
    return *this;
  }
  Writer& operator<<(long v) {
    out_ << v;
    return *this;
  }

  void finish() {
    out_.flush();
    if (!out_) fail(path_, "write failed");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

// `# key=value` preamble lines followed by a pinned column-header line.
// Returns the preamble map; rejects duplicates, missing, or unknown keys.
std::map<std::string, std::string> read_preamble(
    LineReader& in, const std::vector<std::string>& keys,
    const std::string& header) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (true) {
    if (!in.next(line)) {
      fail_line(in.path(), in.line_no(), "unexpected end of file");
    }
    if (line.rfind("# ", 0) != 0) break;
    const std::string body = line.substr(2);
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      fail_line(in.path(), in.line_no(), "malformed preamble line");
    }
    const std::string key = body.substr(0, eq);
    bool known = false;
    for (const auto& k : keys) known = known || k == key;
    if (!known) {
      fail_line(in.path(), in.line_no(), "unknown preamble key '" + key + "'");
    }
    if (!kv.emplace(key, body.substr(eq + 1)).second) {
      fail_line(in.path(), in.line_no(),
                "duplicate preamble key '" + key + "'");
    }
  }
  for (const auto& k : keys) {
    if (!kv.count(k)) {
      fail(in.path(), "missing preamble key '" + k + "'");
    }
  }
  if (line != header) {
    fail_line(in.path(), in.line_no(), "expected header '" + header + "'");
  }
  return kv;
}

double preamble_double(const LineReader& in,
                       const std::map<std::string, std::string>& kv,
                       const std::string& key) {
  double v = 0.0;
  if (!try_parse_double(kv.at(key), v)) {
    fail(in.path(), "preamble key '" + key + "' is not a number");
  }
  return v;
}

long preamble_long(const LineReader& in,
                   const std::map<std::string, std::string>& kv,
                   const std::string& key) {
  long v = 0;
  if (!try_parse_long(kv.at(key), v)) {
    fail(in.path(), "preamble key '" + key + "' is not an integer");
  }
  return v;
}

bool preamble_flag(const LineReader& in,
                   const std::map<std::string, std::string>& kv,
                   const std::string& key) {
  const long v = preamble_long(in, kv, key);
  if (v != 0 && v != 1) {
    fail(in.path(), "preamble key '" + key + "' must be 0 or 1");
  }
  return v == 1;
}

// One table row: leading record index `k`, then `n` doubles.
void parse_record(LineReader& in, const std::string& line, long k, double* out,
                  long n) {
  const std::vector<std::string> f = split(line, ',');
  if (static_cast<long>(f.size()) != n + 1) {
    fail_line(in.path(), in.line_no(),
              "expected " + std::to_string(n + 1) + " fields, got " +
                  std::to_string(f.size()));
  }
  long got = -1;
  if (!try_parse_long(f[0], got) || got != k) {
    fail_line(in.path(), in.line_no(),
              "expected record index " + std::to_string(k));
  }
  for (long i = 0; i < n; ++i) {
    if (!try_parse_double(f[i + 1], out[i])) {
      fail_line(in.path(), in.line_no(), "bad number '" + f[i + 1] + "'");
    }
  }
}

void expect_eof(LineReader& in) {
  std::string line;
  while (in.next(line)) {
    if (!line.empty()) {
      fail_line(in.path(), in.line_no(), "trailing content after table");
    }
  }
}

MatrixXd parse_matrix_csv(const std::string& path, const std::string& key,
                          const std::string& csv, long rows, long cols) {
  const std::vector<std::string> f = split(csv, ',');
  if (static_cast<long>(f.size()) != rows * cols) {
    fail(path, "key '" + key + "' expects " + std::to_string(rows * cols) +
                   " values, got " + std::to_string(f.size()));
  }
  MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) {
      if (!try_parse_double(f[i * cols + j], m(i, j))) {
        fail(path, "key '" + key + "' has bad number '" + f[i * cols + j] +
                       "'");
      }
    }
  }
  return m;
}

std::string matrix_csv(const MatrixXd& m) {
  std::string out;
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) {
      if (i > 0 || j > 0) out += ',';
      out += format_double(m(i, j));
    }
  }
  return out;
}

constexpr char kTrajHeader[] = "k,t,r1,v1,r2,v2,psi,omega,uT,uR";
constexpr char kGainsHeader[] =
    "k,t,K11,K12,K13,K14,K15,K16,K21,K22,K23,K24,K25,K26";
constexpr char kSimHeader[] =
    "t,r1,v1,r2,v2,psi,omega,r1s,v1s,r2s,v2s,psis,omegas,uTs,uRs,uTfb,uRfb,"
    "uT,uR,mu_arma,mu_lqr";

}  // namespace

void write_trajectory(const std::string& path,
                      const trajopt::OptimalTrajectory& traj, double eq_tol,
                      double stat_tol) {
  const long n = traj.num_knots();
  if (traj.xs.rows() != 6 || traj.us.rows() != 2) {
    fail(path, "trajectory table stores 6 states and 2 inputs per knot");
  }
  if (n < 1 || traj.us.cols() != n) {
    fail(path, "trajectory has inconsistent knot counts");
  }
  Writer out(path);
  out << "# N=" << (n - 1) << '\n';
  out << "# T_star=" << format_double(traj.T_star) << '\n';
  out << "# dt=" << format_double(traj.dt) << '\n';
  out << "# eq_tol=" << format_double(eq_tol) << '\n';
  out << "# stat_tol=" << format_double(stat_tol) << '\n';
  out << "# feasibility=" << format_double(traj.feasibility) << '\n';
  out << "# objective=" << format_double(traj.objective) << '\n';
  out << kTrajHeader << '\n';
  for (long k = 0; k < n; ++k) {
    out << k << ',' << format_double(traj.dt * static_cast<double>(k));
    for (int i = 0; i < 6; ++i) out << ',' << format_double(traj.xs(i, k));
    for (int i = 0; i < 2; ++i) out << ',' << format_double(traj.us(i, k));
    out << '\n';
  }
  out.finish();
}

TrajectoryFile read_trajectory(const std::string& path) {
  LineReader in(path);
  const auto kv = read_preamble(in,
                                {"N", "T_star", "dt", "eq_tol", "stat_tol",
                                 "feasibility", "objective"},
                                kTrajHeader);
  const long N = preamble_long(in, kv, "N");
  if (N < 1) fail(path, "N must be >= 1");

  TrajectoryFile tf;
  tf.traj.T_star = preamble_double(in, kv, "T_star");
  tf.traj.dt = preamble_double(in, kv, "dt");
  tf.traj.feasibility = preamble_double(in, kv, "feasibility");
  tf.traj.objective = preamble_double(in, kv, "objective");
  tf.eq_tol = preamble_double(in, kv, "eq_tol");
  tf.stat_tol = preamble_double(in, kv, "stat_tol");
  tf.traj.xs.resize(6, N + 1);
  tf.traj.us.resize(2, N + 1);

  std::string line;
  double row[9];
  for (long k = 0; k <= N; ++k) {
    if (!in.next(line)) {
      fail_line(in.path(), in.line_no(), "unexpected end of file");
    }
    parse_record(in, line, k, row, 9);
    for (int i = 0; i < 6; ++i) tf.traj.xs(i, k) = row[i + 1];
    for (int i = 0; i < 2; ++i) tf.traj.us(i, k) = row[i + 7];
  }
  expect_eof(in);
  return tf;
}

void write_gain_schedule(const std::string& path,
                         const lqr::GainSchedule& sched,
                         const lqr::LqrWeights& weights) {
  const long n = sched.size();
  if (n < 1 || static_cast<long>(sched.t.size()) != n) {
    fail(path, "gain schedule has inconsistent record counts");
  }
  if (weights.R1.rows() != 6 || weights.R1.cols() != 6 ||
      weights.R2.rows() != 2 || weights.R2.cols() != 2) {
    fail(path, "weights must be 6x6 (R1) and 2x2 (R2)");
  }
  Writer out(path);
  out << "# n=" << n << '\n';
  out << "# hover=" << (sched.hover ? "1" : "0") << '\n';
  out << "# R1=" << matrix_csv(weights.R1) << '\n';
  out << "# R2=" << matrix_csv(weights.R2) << '\n';
  out << kGainsHeader << '\n';
  for (long k = 0; k < n; ++k) {
    out << k << ',' << format_double(sched.t[k]);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 6; ++j) {
        out << ',' << format_double(sched.K[k](i, j));
      }
    }
    out << '\n';
  }
  out.finish();
}

GainScheduleFile read_gain_schedule(const std::string& path) {
  LineReader in(path);
  const auto kv = read_preamble(in, {"n", "hover", "R1", "R2"}, kGainsHeader);
  const long n = preamble_long(in, kv, "n");
  if (n < 1) fail(path, "n must be >= 1");

  GainScheduleFile gf;
  gf.sched.hover = preamble_flag(in, kv, "hover");
  gf.weights.R1 = parse_matrix_csv(path, "R1", kv.at("R1"), 6, 6);
  gf.weights.R2 = parse_matrix_csv(path, "R2", kv.at("R2"), 2, 2);
  gf.sched.t.resize(n);
  gf.sched.K.resize(n);

  std::string line;
  double row[13];
  for (long k = 0; k < n; ++k) {
    if (!in.next(line)) {
      fail_line(in.path(), in.line_no(), "unexpected end of file");
    }
    parse_record(in, line, k, row, 13);
    gf.sched.t[k] = row[0];
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 6; ++j) {
        gf.sched.K[k](i, j) = row[1 + 6 * i + j];
      }
    }
  }
  expect_eof(in);
  return gf;
}

void write_arma_model(const std::string& path, const ArmaModelFile& m) {
  const long pos_nu = m.position_emits_both ? 2 : 1;
  if (m.l_w < 1 || m.theta_pos.rows() != m.l_w * (pos_nu + 2) ||
      m.theta_pos.cols() != pos_nu) {
    fail(path, "position theta shape does not match l_w");
  }
  if (!m.position_emits_both &&
      (m.theta_ang.rows() != m.l_w * 2 || m.theta_ang.cols() != 1)) {
    fail(path, "angle theta shape does not match l_w");
  }
  Writer out(path);
  out << "l_w=" << static_cast<long>(m.l_w) << '\n';
  out << "position_emits_both=" << (m.position_emits_both ? "1" : "0") << '\n';
  out << "n_runs=" << static_cast<long>(m.n_runs) << '\n';
  out << "seed=" << std::to_string(m.seed) << '\n';
  out << "ridge=" << format_double(m.ridge) << '\n';
  out << "rows=" << m.rows << '\n';
  out << "pos_n_u=" << pos_nu << '\n';
  out << "pos_n_y=" << 2L << '\n';
  out << "pos_rms=" << format_double(m.rms_pos) << '\n';
  out << "pos_grad=" << format_double(m.grad_pos) << '\n';
  out << "pos_theta=" << matrix_csv(m.theta_pos) << '\n';
  if (!m.position_emits_both) {
    out << "ang_n_u=" << 1L << '\n';
    out << "ang_n_y=" << 1L << '\n';
    out << "ang_rms=" << format_double(m.rms_ang) << '\n';
    out << "ang_grad=" << format_double(m.grad_ang) << '\n';
    out << "ang_theta=" << matrix_csv(m.theta_ang) << '\n';
  }
  out.finish();
}

ArmaModelFile read_arma_model(const std::string& path) {
  LineReader in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (in.next(line)) {
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail_line(path, in.line_no(), "malformed key-value line");
    }
    if (!kv.emplace(line.substr(0, eq), line.substr(eq + 1)).second) {
      fail_line(path, in.line_no(),
                "duplicate key '" + line.substr(0, eq) + "'");
    }
  }

  const std::vector<std::string> base = {
      "l_w",  "position_emits_both", "n_runs",   "seed",
      "ridge", "rows",               "pos_n_u",  "pos_n_y",
      "pos_rms", "pos_grad",         "pos_theta"};
  const std::vector<std::string> ang = {"ang_n_u", "ang_n_y", "ang_rms",
                                        "ang_grad", "ang_theta"};
  for (const auto& k : base) {
    if (!kv.count(k)) fail(path, "missing key '" + k + "'");
  }

  ArmaModelFile m;
  m.l_w = static_cast<int>(preamble_long(in, kv, "l_w"));
  if (m.l_w < 1) fail(path, "l_w must be >= 1");
  m.position_emits_both = preamble_flag(in, kv, "position_emits_both");
  m.n_runs = static_cast<int>(preamble_long(in, kv, "n_runs"));
  if (!try_parse_u64(kv.at("seed"), m.seed)) {
    fail(path, "key 'seed' is not an unsigned integer");
  }
  m.ridge = preamble_double(in, kv, "ridge");
  m.rows = preamble_long(in, kv, "rows");

  std::size_t expected = base.size();
  if (!m.position_emits_both) {
    expected += ang.size();
    for (const auto& k : ang) {
      if (!kv.count(k)) fail(path, "missing key '" + k + "'");
    }
  }
  if (kv.size() != expected) {
    for (const auto& [k, v] : kv) {
      bool known = false;
      for (const auto& b : base) known = known || b == k;
      for (const auto& a : ang) {
        known = known || (!m.position_emits_both && a == k);
      }
      if (!known) fail(path, "unknown key '" + k + "'");
    }
  }

  const long pos_nu = m.position_emits_both ? 2 : 1;
  if (preamble_long(in, kv, "pos_n_u") != pos_nu ||
      preamble_long(in, kv, "pos_n_y") != 2) {
    fail(path, "position controller dimensions are inconsistent");
  }
  m.rms_pos = preamble_double(in, kv, "pos_rms");
  m.grad_pos = preamble_double(in, kv, "pos_grad");
  m.theta_pos = parse_matrix_csv(path, "pos_theta", kv.at("pos_theta"),
                                 m.l_w * (pos_nu + 2), pos_nu);
  if (!m.position_emits_both) {
    if (preamble_long(in, kv, "ang_n_u") != 1 ||
        preamble_long(in, kv, "ang_n_y") != 1) {
      fail(path, "angle controller dimensions are inconsistent");
    }
    m.rms_ang = preamble_double(in, kv, "ang_rms");
    m.grad_ang = preamble_double(in, kv, "ang_grad");
    m.theta_ang =
        parse_matrix_csv(path, "ang_theta", kv.at("ang_theta"), m.l_w * 2, 1);
  }
  return m;
}

void write_sim_log(const std::string& path, const sim::SimResult& r) {
  Writer out(path);
  out << "# t_star=" << format_double(r.t_star) << '\n';
  out << "# diverged=" << (r.diverged ? "1" : "0") << '\n';
  out << kSimHeader << '\n';
  double row[20];
  for (const auto& lr : r.log) {
    for (int i = 0; i < 6; ++i) row[i] = lr.x[i];
    for (int i = 0; i < 6; ++i) row[6 + i] = lr.x_ref[i];
    for (int i = 0; i < 2; ++i) row[12 + i] = lr.u_ref[i];
    for (int i = 0; i < 2; ++i) row[14 + i] = lr.u_fb[i];
    for (int i = 0; i < 2; ++i) row[16 + i] = lr.u_total[i];
    row[18] = lr.mu_arma;
    row[19] = lr.mu_lqr;
    out << format_double(lr.t) << ',' << join_doubles(row, 20) << '\n';
  }
  out.finish();
}

sim::SimResult read_sim_log(const std::string& path) {
  LineReader in(path);
  const auto kv = read_preamble(in, {"t_star", "diverged"}, kSimHeader);

  sim::SimResult r;
  r.t_star = preamble_double(in, kv, "t_star");
  r.diverged = preamble_flag(in, kv, "diverged");

  std::string line;
  while (in.next(line)) {
    if (line.empty()) {
      expect_eof(in);
      break;
    }
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 21) {
      fail_line(path, in.line_no(),
                "expected 21 fields, got " + std::to_string(f.size()));
    }
    double row[21];
    for (int i = 0; i < 21; ++i) {
      if (!try_parse_double(f[i], row[i])) {
        fail_line(path, in.line_no(), "bad number '" + f[i] + "'");
      }
    }
    sim::LogRow lr;
    lr.t = row[0];
    for (int i = 0; i < 6; ++i) lr.x[i] = row[1 + i];
    for (int i = 0; i < 6; ++i) lr.x_ref[i] = row[7 + i];
    for (int i = 0; i < 2; ++i) lr.u_ref[i] = row[13 + i];
    for (int i = 0; i < 2; ++i) lr.u_fb[i] = row[15 + i];
    for (int i = 0; i < 2; ++i) lr.u_total[i] = row[17 + i];
    lr.mu_arma = row[19];
    lr.mu_lqr = row[20];
    r.log.push_back(lr);
  }
  if (r.log.empty()) fail(path, "log has no rows");
  r.m = sim::metrics(r);
  return r;
}

}  // namespace bicopter::io
