#pragma once

#include <span>
#include <vector>

#include "sepclr/matrix.hpp"

// Direct double-loop evaluations of the kernel estimators, written from the
// formulas with no shared code, used as reference values.
namespace sepclr::verify::naive {

double sq_dist(std::span<const double> a, std::span<const double> b);
double entropy(const Matrix& z, double tau, bool exclude_self = false);
double uniformity(const Matrix& z, double tau);
double alignment(const Matrix& z, const std::vector<Matrix>& views, double tau);
double sprime_uniformity(const Matrix& s_target, std::span<const double> s_prime, double tau);
double infoless(const Matrix& s_background, std::span<const double> s_prime, double tau);
double kjem(const Matrix& c, const Matrix& s, double tau);
double kmi(const Matrix& c, const Matrix& s, double tau);
double mmd(const Matrix& x, const Matrix& y, double tau);
Matrix attribute_weights(std::span<const double> a, double sigma);
double sup_alignment_out(const Matrix& s_d, std::span<const double> a, double sigma, double tau);
double sup_alignment_in(const Matrix& s_d, std::span<const double> a, double sigma, double tau);
double sup_infomax(const Matrix& s_d, std::span<const double> a, double sigma, double tau);

}  // namespace sepclr::verify::naive
