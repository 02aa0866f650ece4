#include "wemsfem/wavelet.hpp"

#include <bit>
#include <cmath>
#include <sstream>
#include <utility>

namespace wemsfem::wavelet {

namespace {

void check_index(int level, int translation) {
  if (level < 0 || level > 30) throw Error("Haar level " + std::to_string(level) + " out of range");
  const int count = level == 0 ? 1 : (1 << (level - 1));
  if (translation < 0 || translation >= count) {
    std::ostringstream msg;
    msg << "Haar translation " << translation << " out of range for level " << level;
    throw Error(msg.str());
  }
}

// Support [lo, hi) and the sign switch point of a member.
struct Support {
  double lo;
  double mid;
  double hi;
  double amplitude;
};

Support support_of(int level, int translation) {
  if (level == 0) return {0.0, 1.0, 1.0, 1.0};
  const double width = std::ldexp(1.0, -(level - 1));
  const double lo = translation * width;
  return {lo, lo + 0.5 * width, lo + width, std::sqrt(std::ldexp(1.0, level - 1))};
}

}  // namespace

int flat_index(HaarIndex idx) {
  check_index(idx.level, idx.translation);
  return idx.level == 0 ? 0 : (1 << (idx.level - 1)) + idx.translation;
}

HaarIndex from_flat(int flat) {
  if (flat < 0) throw Error("negative Haar index");
  if (flat == 0) return {0, 0};
  const int level = std::bit_width(static_cast<unsigned>(flat));
  return {level, flat - (1 << (level - 1))};
}

double haar_eval(int level, int translation, double x) {
  check_index(level, translation);
  if (x < 0.0 || x > 1.0) return 0.0;
  const Support s = support_of(level, translation);
  if (level == 0) return 1.0;
  const bool last = s.hi >= 1.0;
  if (x < s.lo) return 0.0;
  if (x >= s.hi && !(last && x == 1.0)) return 0.0;
  return x < s.mid ? s.amplitude : -s.amplitude;
}

double haar_integral(int level, int translation, double a, double b) {
  check_index(level, translation);
  a = std::max(a, 0.0);
  b = std::min(b, 1.0);
  if (b <= a) return 0.0;
  const Support s = support_of(level, translation);
  if (level == 0) return b - a;
  auto overlap = [&](double lo, double hi) { return std::max(0.0, std::min(b, hi) - std::max(a, lo)); };
  return s.amplitude * (overlap(s.lo, s.mid) - overlap(s.mid, s.hi));
}

HaarBasis::HaarBasis(int level) : level_(level) {
  if (level < 0 || level > 30) throw Error("Haar level " + std::to_string(level) + " out of range");
}

double HaarBasis::eval(int flat, double x) const {
  if (flat < 0 || flat >= dim()) throw Error("Haar basis index out of range");
  const HaarIndex idx = from_flat(flat);
  return haar_eval(idx.level, idx.translation, x);
}

namespace {

// Integrals of the samples over the 2^m dyadic blocks of [0, 1].
std::vector<double> block_integrals(std::span<const double> samples, int m) {
  const std::size_t blocks = std::size_t{1} << m;
  const std::size_t per = samples.size() / blocks;
  const double dx = 1.0 / static_cast<double>(samples.size());
  std::vector<double> out(blocks, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    double sum = 0.0;
    for (std::size_t c = b * per; c < (b + 1) * per; ++c) sum += samples[c];
    out[b] = sum * dx;
  }
  return out;
}

void check_grid(std::size_t cells, int level) {
  if (cells == 0 || !std::has_single_bit(cells))
    throw Error("Haar grids need a power-of-two cell count, got " + std::to_string(cells));
  if (cells < (std::size_t{1} << level))
    throw Error("sample grid is coarser than Haar level " + std::to_string(level));
}

}  // namespace

std::vector<double> project(std::span<const double> samples, int level) {
  const HaarBasis basis(level);
  check_grid(samples.size(), level);
  // Integrals over the finest blocks needed, then pairwise sums upward.
  std::vector<std::vector<double>> pyramid(static_cast<std::size_t>(level) + 1);
  pyramid[static_cast<std::size_t>(level)] = block_integrals(samples, level);
  for (int m = level; m > 0; --m) {
    const auto& finer = pyramid[static_cast<std::size_t>(m)];
    auto& coarser = pyramid[static_cast<std::size_t>(m - 1)];
    coarser.resize(finer.size() / 2);
    for (std::size_t b = 0; b < coarser.size(); ++b) coarser[b] = finer[2 * b] + finer[2 * b + 1];
  }
  std::vector<double> coeffs(static_cast<std::size_t>(basis.dim()), 0.0);
  coeffs[0] = pyramid[0][0];
  for (int f = 1; f < basis.dim(); ++f) {
    const HaarIndex idx = from_flat(f);
    const auto& halves = pyramid[static_cast<std::size_t>(idx.level)];
    const double amplitude = std::sqrt(std::ldexp(1.0, idx.level - 1));
    const auto j = static_cast<std::size_t>(idx.translation);
    coeffs[static_cast<std::size_t>(f)] = amplitude * (halves[2 * j] - halves[2 * j + 1]);
  }
  return coeffs;
}

std::vector<double> reconstruct(std::span<const double> coefficients, int cells) {
  const std::size_t dim = coefficients.size();
  if (dim == 0 || !std::has_single_bit(dim)) throw Error("coefficient count must be a power of two");
  const int level = std::countr_zero(dim);
  if (cells <= 0) throw Error("reconstruct needs a positive cell count");
  check_grid(static_cast<std::size_t>(cells), level);
  // Values on the 2^level dyadic blocks, refined one level at a time.
  std::vector<double> values{coefficients[0]};
  for (int m = 1; m <= level; ++m) {
    const double amplitude = std::sqrt(std::ldexp(1.0, m - 1));
    std::vector<double> finer(values.size() * 2);
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double c = coefficients[(std::size_t{1} << (m - 1)) + j];
      finer[2 * j] = values[j] + amplitude * c;
      finer[2 * j + 1] = values[j] - amplitude * c;
    }
    values = std::move(finer);
  }
  const std::size_t per = static_cast<std::size_t>(cells) / values.size();
  std::vector<double> out(static_cast<std::size_t>(cells));
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = values[c / per];
  return out;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw Error("l2_distance: grids differ");
  double sum = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) sum += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(sum / static_cast<double>(a.size()));
}

}  // namespace wemsfem::wavelet
