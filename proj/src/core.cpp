#include "pe/core.hpp"

#include <algorithm>

namespace pe {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double pairwise_sum_range(const double* first, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += first[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_range(first, half) +
         pairwise_sum_range(first + half, n - half);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t tag : tags) h = splitmix64(h ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
  return h;
}

std::size_t argmax_uniform_ties(std::span<const double> scores, Rng& rng) {
  if (scores.empty()) throw PreconditionError("argmax over an empty set");
  const double best = *std::max_element(scores.begin(), scores.end());
  std::size_t n_best = 0;
  std::size_t first = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] == best) {
      if (n_best == 0) first = i;
      ++n_best;
    }
  }
  if (n_best == 1) return first;
  std::size_t pick = uniform_index(n_best, rng);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] == best && pick-- == 0) return i;
  }
  return first;
}

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_range(values.data(), values.size());
}

void History::append(HistoryRecord record) {
  if (!records_.empty() && record.step <= records_.back().step) {
    throw PreconditionError("history steps must strictly increase");
  }
  records_.push_back(std::move(record));
}

}  // namespace pe
