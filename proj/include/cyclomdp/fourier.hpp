#pragma once

#include <cmath>
#include <numbers>
#include <vector>

namespace cyclomdp {

/// Periodic regressor basis: an optional intercept plus a cosine/sine pair
/// per harmonic frequency (in cycles per period). Phases are reduced modulo
/// the period, so evaluate(t) == evaluate(t + period) bit for bit.
struct FourierBasis {
  int period = 24;
  std::vector<double> frequencies;
  bool intercept = true;

  int dimension() const { return (intercept ? 1 : 0) + 2 * static_cast<int>(frequencies.size()); }

  std::vector<double> evaluate(double t) const {
    std::vector<double> out;
    out.reserve(dimension());
    double u = std::fmod(t - 1.0, static_cast<double>(period));
    if (u < 0.0) u += period;
    const double x = u / period;
    if (intercept) out.push_back(1.0);
    for (double f : frequencies) {
      const double angle = 2.0 * std::numbers::pi * f * x;
      out.push_back(std::cos(angle));
      out.push_back(std::sin(angle));
    }
    return out;
  }

  double dot(double t, const std::vector<double>& coeffs) const {
    const std::vector<double> phi = evaluate(t);
    double acc = 0.0;
    for (size_t k = 0; k < phi.size(); ++k) acc += phi[k] * coeffs[k];
    return acc;
  }

  bool operator==(const FourierBasis&) const = default;
};

}  // namespace cyclomdp
