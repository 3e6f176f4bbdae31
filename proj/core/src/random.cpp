#include "termctl/random.hpp"

#include "termctl/special.hpp"

namespace termctl {

double Rng::normal() { return special::normal_quantile(uniform()); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  // rejection on the top of the range keeps the draw unbiased
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

}  // namespace termctl
