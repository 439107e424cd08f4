#include "sepclr/verify/naive.hpp"

#include <cmath>

namespace sepclr::verify::naive {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
  return d;
}

double entropy(const Matrix& z, double tau, bool exclude_self) {
  const std::size_t n = z.rows();
  double h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double p = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (exclude_self && i == j) continue;
      p += std::exp(-sq_dist(z.row(i), z.row(j)) / (2.0 * tau));
    }
    p /= static_cast<double>(exclude_self ? n - 1 : n);
    h -= std::log(p);
  }
  return h / static_cast<double>(n);
}

double uniformity(const Matrix& z, double tau) {
  const std::size_t n = z.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) total += std::exp(-sq_dist(z.row(i), z.row(j)) / (2.0 * tau));
  return std::log(total / static_cast<double>(n * n));
}

double alignment(const Matrix& z, const std::vector<Matrix>& views, double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double p = 0.0;
    for (const auto& v : views) p += std::exp(-sq_dist(z.row(i), v.row(i)) / (2.0 * tau));
    total += std::log(p / static_cast<double>(views.size()));
  }
  return -total / static_cast<double>(z.rows());
}

double sprime_uniformity(const Matrix& s, std::span<const double> s_prime, double tau) {
  const std::size_t n = s.rows();
  double outer = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < n; ++j) inner += std::exp(-sq_dist(s.row(i), s.row(j)) / tau);
    outer += std::exp(-sq_dist(s.row(i), s_prime) / tau) + inner / (2.0 * static_cast<double>(n));
  }
  return std::log(outer / static_cast<double>(n));
}

double infoless(const Matrix& s, std::span<const double> s_prime, double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i) total += sq_dist(s.row(i), s_prime) / (2.0 * tau);
  return total / static_cast<double>(s.rows());
}

double kjem(const Matrix& c, const Matrix& s, double tau) {
  const std::size_t n = c.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double p = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      p += std::exp(-sq_dist(c.row(i), c.row(j)) / (2.0 * tau)) * std::exp(-sq_dist(s.row(i), s.row(j)) / (2.0 * tau));
    }
    total += std::log(p / static_cast<double>(n));
  }
  return total / static_cast<double>(n);
}

double kmi(const Matrix& c, const Matrix& s, double tau) { return entropy(c, tau) + entropy(s, tau) + kjem(c, s, tau); }

double mmd(const Matrix& x, const Matrix& y, double tau) {
  const auto mean_k = [tau](const Matrix& a, const Matrix& b) {
    double t = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < b.rows(); ++j) t += std::exp(-sq_dist(a.row(i), b.row(j)) / (2.0 * tau));
    return t / static_cast<double>(a.rows() * b.rows());
  };
  return mean_k(x, x) + mean_k(y, y) - 2.0 * mean_k(x, y);
}

Matrix attribute_weights(std::span<const double> a, double sigma) {
  const std::size_t n = a.size();
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      w(i, j) = std::exp(-(a[i] - a[j]) * (a[i] - a[j]) / (2.0 * sigma * sigma));
      row += w(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) w(i, j) /= row;
  }
  return w;
}

double sup_alignment_out(const Matrix& s, std::span<const double> a, double sigma, double tau) {
  const Matrix w = attribute_weights(a, sigma);
  double total = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.rows(); ++j) total += w(i, j) * sq_dist(s.row(i), s.row(j)) / (2.0 * tau);
  return total / static_cast<double>(s.rows());
}

double sup_alignment_in(const Matrix& s, std::span<const double> a, double sigma, double tau) {
  const Matrix w = attribute_weights(a, sigma);
  double total = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double p = 0.0;
    for (std::size_t j = 0; j < s.rows(); ++j) p += w(i, j) * std::exp(-sq_dist(s.row(i), s.row(j)) / (2.0 * tau));
    total += std::log(p);
  }
  return -total / static_cast<double>(s.rows());
}

double sup_infomax(const Matrix& s, std::span<const double> a, double sigma, double tau) {
  return sup_alignment_out(s, a, sigma, tau) + uniformity(s, tau);
}

}  // namespace sepclr::verify::naive
