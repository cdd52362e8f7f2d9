#include "mega/rng.hpp"

#include <numeric>

namespace mega {

std::vector<std::uint32_t> sample_without_replacement(Rng& rng, std::uint32_t n,
                                                      std::uint32_t count) {
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::uint32_t j = 0; j < count; ++j) {
        const auto r = static_cast<std::uint32_t>(rng.below(n - j));
        std::swap(idx[j], idx[j + r]);
    }
    idx.resize(count);
    return idx;
}

}  // namespace mega
