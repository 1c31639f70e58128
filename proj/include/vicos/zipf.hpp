#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace vicos {

/// Zipf-like rank selector over n items, after Gray et al.'s generator
/// (the construction YCSB uses).  Rank 1 is the most popular item; with
/// theta = 0 the distribution degenerates to uniform.  theta must lie in
/// [0, 1).
class zipf_generator {
 public:
  zipf_generator(std::uint64_t n, double theta) : n_(n), theta_(theta) {
    if (n < 1) throw std::invalid_argument("zipf: need at least one item");
    if (!(theta >= 0.0) || theta >= 1.0)
      throw std::invalid_argument("zipf: theta must be in [0, 1)");
    zetan_ = zeta(n, theta);
    zeta2_ = zeta(2, theta);
    alpha_ = 1.0 / (1.0 - theta);
    eta_ = (1.0 - std::pow(2.0 / static_cast<double>(n), 1.0 - theta)) /
           (1.0 - zeta2_ / zetan_);
    half_pow_ = std::pow(0.5, theta);
  }

  std::uint64_t n() const { return n_; }
  double theta() const { return theta_; }

  /// Rank in [1, n] for a uniform draw u in [0, 1).
  std::uint64_t rank_for(double u) const {
    double uz = u * zetan_;
    if (uz < 1.0) return 1;
    if (uz < 1.0 + half_pow_) return 2;
    auto r = 1 + static_cast<std::uint64_t>(
                     static_cast<double>(n_) * std::pow(eta_ * u - eta_ + 1.0, alpha_));
    return r > n_ ? n_ : r;
  }

  template <class Rng>
  std::uint64_t next(Rng& rng) {
    return rank_for(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
  }

  /// Exact per-rank probabilities of this construction, obtained by
  /// inverting the generator's piecewise map over the uniform input.
  /// Serves as the analytic reference for distribution tests.
  std::vector<double> pmf() const {
    std::vector<double> p(n_ + 1, 0.0);
    const double t1 = 1.0 / zetan_;               // draw maps to rank 1
    const double t2 = (1.0 + half_pow_) / zetan_;  // ... to rank 2
    p[1] += t1;
    if (n_ >= 2) p[2] += t2 - t1;

    // continuous branch active on [t2, 1): rank k covers the u-interval
    // where n*(eta*u - eta + 1)^alpha lands in [k-1, k)
    auto lower_u = [&](std::uint64_t k) {
      double base = std::pow(static_cast<double>(k) / static_cast<double>(n_),
                             1.0 - theta_);
      return (base - 1.0 + eta_) / eta_;
    };
    for (std::uint64_t k = 1; k <= n_; ++k) {
      double lo = std::max(lower_u(k - 1), t2);
      double hi = std::min(lower_u(k), 1.0);
      if (hi > lo) p[k] += hi - lo;
    }
    return p;
  }

  static double zeta(std::uint64_t n, double theta) {
    double sum = 0.0;
    for (std::uint64_t i = 1; i <= n; ++i) sum += 1.0 / std::pow(static_cast<double>(i), theta);
    return sum;
  }

 private:
  std::uint64_t n_;
  double theta_;
  double zetan_, zeta2_, alpha_, eta_, half_pow_;
};

/// Upper critical value of the chi-square distribution via the
/// Wilson–Hilferty approximation; good to a few tenths for the degrees of
/// freedom used here.
inline double chi_square_critical(std::size_t dof, double z_alpha) {
  double d = static_cast<double>(dof);
  double c = 1.0 - 2.0 / (9.0 * d) + z_alpha * std::sqrt(2.0 / (9.0 * d));
  return d * c * c * c;
}

}  // namespace vicos
