#include "memoc/kernel.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "memoc/errors.hpp"

namespace memoc {

Kernel Kernel::exponential(double rate, Eigen::MatrixXd coef) {
  return sum_of_exponentials({Term{rate, std::move(coef)}});
}

Kernel Kernel::exponential(double rate, double coef) {
  Eigen::MatrixXd m(1, 1);
  m << coef;
  return exponential(rate, std::move(m));
}

Kernel Kernel::sum_of_exponentials(std::vector<Term> terms) {
  if (terms.empty()) throw DomainError("kernel needs at least one term");
  Kernel a;
  a.k_ = static_cast<int>(terms.front().coef.rows());
  a.d_ = static_cast<int>(terms.front().coef.cols());
  for (const auto& t : terms) {
    if (t.rate <= 0.0)
      throw DomainError("exponential kernel rate must be positive");
    if (t.coef.rows() != a.k_ || t.coef.cols() != a.d_)
      throw DomainError("kernel term shapes differ");
  }
  a.terms_ = std::move(terms);
  return a;
}

Kernel Kernel::tabulated(double step, std::vector<Eigen::MatrixXd> samples,
                         bool smooth) {
  if (!(step > 0.0)) throw DomainError("tabulated kernel step must be positive");
  if (samples.size() < 2)
    throw DomainError("tabulated kernel needs at least two samples");
  Kernel a;
  a.k_ = static_cast<int>(samples.front().rows());
  a.d_ = static_cast<int>(samples.front().cols());
  for (const auto& m : samples)
    if (m.rows() != a.k_ || m.cols() != a.d_)
      throw DomainError("tabulated kernel sample shapes differ");
  a.tab_ = std::move(samples);
  a.tab_step_ = step;
  a.smooth_ = smooth;
  return a;
}

Kernel Kernel::zero(int k, int d) {
  return tabulated(1.0, {Eigen::MatrixXd::Zero(k, d), Eigen::MatrixXd::Zero(k, d)},
                   true);
}

Eigen::MatrixXd Kernel::at(double s) const {
  if (s < 0.0) throw DomainError("kernel evaluated at negative s");
  if (is_exponential()) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(k_, d_);
    for (const auto& t : terms_) out += t.coef * std::exp(-t.rate * s);
    return out;
  }
  const int n = static_cast<int>(tab_.size());
  const double pos = s / tab_step_;
  if (pos >= n - 1) {
    if (pos == static_cast<double>(n - 1)) return tab_.back();
    return Eigen::MatrixXd::Zero(k_, d_);
  }
  int i = static_cast<int>(pos);
  const double theta = pos - i;
  return (1.0 - theta) * tab_[i] + theta * tab_[i + 1];
}

double Kernel::support() const {
  if (is_exponential()) return std::numeric_limits<double>::infinity();
  return tab_step_ * (static_cast<double>(tab_.size()) - 1.0);
}

Kernel load_tabulated_kernel_csv(std::istream& in, int k, int d, bool smooth) {
  std::vector<Eigen::MatrixXd> samples;
  std::string line;
  double step = 0.0;
  double prev_s = 0.0;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != 1 + k * d)
      throw ConfigError("kernel_csv",
                        "kernel CSV row " + std::to_string(row) + " has " +
                            std::to_string(vals.size()) + " fields, expected " +
                            std::to_string(1 + k * d));
    Eigen::MatrixXd m(k, d);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = vals[1 + i * d + j];
    if (row == 0 && vals[0] != 0.0)
      throw ConfigError("kernel_csv", "kernel CSV grid must start at s=0");
    if (row == 1) step = vals[0];
    if (row >= 1) {
      const double ds = vals[0] - prev_s;
      if (std::abs(ds - step) > 1e-12 * std::max(1.0, step))
        throw ConfigError("kernel_csv", "kernel CSV grid is not uniform");
    }
    prev_s = vals[0];
    samples.push_back(std::move(m));
    ++row;
  }
  return Kernel::tabulated(step, std::move(samples), smooth);
}

namespace {

double frobenius(const Eigen::MatrixXd& m) { return m.norm(); }

// ||A(.)||_F of an exponential sum integrated over (0, inf). The norm of a
// sum has no closed form, so integrate dyadic segments with composite Simpson
// until the remaining tail bound is negligible.
double l1_of_exponential_sum(const std::vector<Kernel::Term>& terms) {
  auto f = [&](double s) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(terms.front().coef.rows(),
                                              terms.front().coef.cols());
    for (const auto& t : terms) m += t.coef * std::exp(-t.rate * s);
    return frobenius(m);
  };
  double min_rate = std::numeric_limits<double>::infinity();
  for (const auto& t : terms) min_rate = std::min(min_rate, t.rate);
  double a = 0.0, len = 1.0 / min_rate, acc = 0.0;
  for (int seg = 0; seg < 80; ++seg) {
    const int panels = 512;
    const double h = len / panels;
    double s_acc = f(a) + f(a + len);
    for (int i = 1; i < panels; ++i)
      s_acc += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
    acc += s_acc * h / 3.0;
    a += len;
    len *= 2.0;
    double tail = 0.0;
    for (const auto& t : terms)
      tail += frobenius(t.coef) * std::exp(-t.rate * a) / t.rate;
    if (tail <= 1e-15 * std::max(acc, 1e-300)) break;
  }
  return acc;
}

}  // namespace

KernelNorms kernel_norms(const Kernel& a) {
  KernelNorms out;
  if (a.is_exponential()) {
    const auto& terms = a.exp_terms();
    if (terms.size() == 1) {
      const double c = frobenius(terms[0].coef);
      out.l1 = c / terms[0].rate;
    } else {
      out.l1 = l1_of_exponential_sum(terms);
    }
    double l2sq = 0.0, dl2sq = 0.0;
    for (const auto& ti : terms)
      for (const auto& tj : terms) {
        const double ip = (ti.coef.array() * tj.coef.array()).sum();
        l2sq += ip / (ti.rate + tj.rate);
        dl2sq += ti.rate * tj.rate * ip / (ti.rate + tj.rate);
      }
    out.l2 = std::sqrt(std::max(0.0, l2sq));
    out.dl2 = std::sqrt(std::max(0.0, dl2sq));
    return out;
  }
  const auto& tab = a.tab_samples();
  const int n = static_cast<int>(tab.size());
  const double h = a.tab_step();
  Eigen::VectorXd f1(n), f2(n);
  for (int i = 0; i < n; ++i) {
    const double fn = frobenius(tab[i]);
    f1(i) = fn;
    f2(i) = fn * fn;
  }
  out.l1 = trapezoid(f1, h);
  out.l2 = std::sqrt(std::max(0.0, trapezoid(f2, h)));
  if (a.tabulated_smooth()) {
    Eigen::VectorXd fd(n);
    for (int i = 0; i < n; ++i) {
      Eigen::MatrixXd dm;
      if (i == 0)
        dm = (tab[1] - tab[0]) / h;
      else if (i == n - 1)
        dm = (tab[n - 1] - tab[n - 2]) / h;
      else
        dm = (tab[i + 1] - tab[i - 1]) / (2.0 * h);
      fd(i) = dm.squaredNorm();
    }
    out.dl2 = std::sqrt(std::max(0.0, trapezoid(fd, h)));
  }
  return out;
}

HistoryState::HistoryState(Eigen::VectorXd x_, GridFunction z_)
    : x(std::move(x_)), z(std::move(z_)) {
  if (x.size() != z.dim())
    throw DomainError("history state and past function dimensions differ");
}

bool HistoryState::in_E0(double tol) const {
  return (x - z.node(0)).norm() <= tol;
}

namespace {

// Tail of the history piece: int_{s_max}^inf A(t+s) z(s) ds with
// z(s) = z_N exp(-rho (s - s_max)) beyond the window.
Eigen::VectorXd history_tail(const Kernel& a, const GridFunction& z, double t) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(a.rows());
  if (z.tail().kind != Tail::Kind::ExponentialDecay) return out;
  const double rho = z.tail().rate;
  const Eigen::VectorXd zn = z.node(z.nodes() - 1);
  const double smax = z.s_max();
  if (a.is_exponential()) {
    for (const auto& term : a.exp_terms())
      out += std::exp(-term.rate * (t + smax)) / (term.rate + rho) *
             (term.coef * zn);
    return out;
  }
  // Tabulated kernel: integrate over the overlap of the tail with the
  // kernel support, trapezoid on the kernel grid.
  const double s_end = a.support() - t;
  if (s_end <= smax) return out;
  const double h = a.tab_step();
  const int steps = static_cast<int>(std::ceil((s_end - smax) / h));
  const double hh = (s_end - smax) / steps;
  Eigen::VectorXd prev = a.at(t + smax) * zn;
  for (int i = 1; i <= steps; ++i) {
    const double s = smax + i * hh;
    const Eigen::VectorXd cur =
        a.at(t + s) * (zn * std::exp(-rho * (s - smax)));
    out += 0.5 * hh * (prev + cur);
    prev = cur;
  }
  return out;
}

}  // namespace

Eigen::VectorXd memory_history_piece(const Kernel& a, const GridFunction& z,
                                     double t) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(a.rows());
  const int n = z.nodes();
  const double hz = z.step();
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    out += (w * hz) * (a.at(t + i * hz) * z.node(i));
  }
  out += history_tail(a, z, t);
  return out;
}

Eigen::VectorXd memory_integral(const Kernel& a, const HistoryState& alpha,
                                const Eigen::MatrixXd& traj, double h,
                                double t) {
  if (t < 0.0) throw DomainError("memory integral needs t >= 0");
  Eigen::VectorXd out = memory_history_piece(a, alpha.z, t);

  // Trajectory piece, trapezoid over the solved nodes up to t plus a partial
  // last interval when t is off the grid.
  if (t > 0.0) {
    const int last = std::min<int>(static_cast<int>(t / h + 1e-9),
                                   static_cast<int>(traj.rows()) - 1);
    for (int j = 0; j <= last; ++j) {
      const double w = (j == 0 || j == last) ? 0.5 : 1.0;
      out += (w * h) * (a.at(t - j * h) * traj.row(j).transpose());
    }
    const double t_last = last * h;
    if (t - t_last > 1e-12 * std::max(1.0, t)) {
      if (last + 1 >= traj.rows())
        throw DomainError("trajectory record does not cover t");
      const double dt = t - t_last;
      const double theta = dt / h;
      const Eigen::VectorXd y_t =
          ((1.0 - theta) * traj.row(last) + theta * traj.row(last + 1))
              .transpose();
      out += 0.5 * dt *
             (a.at(dt) * traj.row(last).transpose() + a.at(0.0) * y_t);
    }
  }
  return out;
}

Eigen::VectorXd exp_moment(const GridFunction& z, double delta) {
  if (delta <= 0.0) throw DomainError("exp_moment needs delta > 0");
  const int n = z.nodes();
  const double h = z.step();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(z.dim());
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    out += (w * h * std::exp(-delta * i * h)) * z.node(i);
  }
  if (z.tail().kind == Tail::Kind::ExponentialDecay)
    out += std::exp(-delta * z.s_max()) / (delta + z.tail().rate) *
           z.node(n - 1);
  return out;
}

Eigen::MatrixXd exp_memory_channel_path(double delta,
                                        const Eigen::MatrixXd& x_path,
                                        double h, const Eigen::VectorXd& m0) {
  if (delta <= 0.0) throw DomainError("exp_memory_channel needs delta > 0");
  if (!(h > 0.0)) throw DomainError("exp_memory_channel needs h > 0");
  const auto n = x_path.rows();
  Eigen::MatrixXd m(n, x_path.cols());
  m.row(0) = m0.transpose();
  // Exact update for piecewise-linear x:
  //   m_{i+1} = e^{-dh} m_i + ca * x_i + cb * (x_{i+1} - x_i)
  const double em = std::expm1(-delta * h);
  const double decay = 1.0 + em;
  const double ca = -em / delta;
  const double cb = (delta * h + em) / (delta * delta * h);
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    m.row(i + 1) = decay * m.row(i) + ca * x_path.row(i) +
                   cb * (x_path.row(i + 1) - x_path.row(i));
  return m;
}

Eigen::VectorXd exp_memory_channel(double delta, const Eigen::MatrixXd& x_path,
                                   double h, const Eigen::VectorXd& m0) {
  return exp_memory_channel_path(delta, x_path, h, m0)
      .row(x_path.rows() - 1)
      .transpose();
}

}  // namespace memoc
