#pragma once

#include <span>
#include <vector>

#include "wemsfem/common.hpp"

namespace wemsfem::wavelet {

/// Identifies one member of the Haar hierarchy on [0, 1]. Level 0 is the
/// scaling function; level m >= 1 carries translations 0 <= j < 2^(m-1).
struct HaarIndex {
  int level = 0;
  int translation = 0;
};

/// Position of (m, j) in the flattened basis of V_l: 0 for the scaling
/// function, 2^(m-1) + j otherwise.
int flat_index(HaarIndex idx);
HaarIndex from_flat(int flat);

/// Pointwise value with the half-open convention: supports are [a, b),
/// except that x = 1 takes the value of the last interval.
double haar_eval(int level, int translation, double x);

/// Exact integral of a member over [a, b] within [0, 1].
double haar_integral(int level, int translation, double a, double b);

/// Orthonormal basis of V_l = span of all members up to level l.
class HaarBasis {
public:
  explicit HaarBasis(int level);

  int level() const { return level_; }
  int dim() const { return 1 << level_; }
  HaarIndex member(int flat) const { return from_flat(flat); }
  double eval(int flat, double x) const;

private:
  int level_;
};

/// Coefficients (v, basis_idx) of a piecewise-constant function given by
/// its values on a uniform grid of 2^p >= 2^l cells. Inner products are
/// exact.
std::vector<double> project(std::span<const double> samples, int level);

/// Cell values of sum_idx c_idx basis_idx on a grid of `cells` cells.
std::vector<double> reconstruct(std::span<const double> coefficients, int cells);

/// L2(0, 1) distance between two piecewise-constant functions on the same
/// uniform grid.
double l2_distance(std::span<const double> a, std::span<const double> b);

}  // namespace wemsfem::wavelet
