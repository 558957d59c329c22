#include "imed/tensor.hpp"

#include <cmath>
#include <unordered_set>

namespace imed {

void zero_grads(const ParamList& params) {
  for (auto* p : params) p->zero_grad();
}

std::size_t count_params(const ParamList& params) {
  std::size_t total = 0;
  for (auto* p : unique_params(params)) total += static_cast<std::size_t>(p->size());
  return total;
}

double grad_norm(const ParamList& params) {
  double sq = 0.0;
  for (auto* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

ParamList unique_params(const ParamList& params) {
  ParamList out;
  std::unordered_set<const Parameter*> seen;
  for (auto* p : params) {
    if (seen.insert(p).second) out.push_back(p);
  }
  return out;
}

namespace {

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  const std::uint64_t t = fnv1a(tag);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  Rng r = make_stream(seed, tag, index);
  return r();
}

Matrix randn(Eigen::Index rows, Eigen::Index cols, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix rand_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace imed

namespace imed {

double clip_grad_norm(const ParamList& params, double max_norm) {
  const double n = grad_norm(params);
  if (max_norm > 0.0 && n > max_norm) {
    const double s = max_norm / n;
    for (auto* p : params) p->grad *= s;
  }
  return n;
}

}  // namespace imed
