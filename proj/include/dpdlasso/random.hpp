#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace dpdlasso {

/// Philox4x32-10 counter-based generator. A stream is fixed by
/// (seed, replication, stream id); the block counter walks within it.
class Philox {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    Philox(std::uint64_t seed, std::uint32_t replication, std::uint32_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          rep_(replication), stream_(stream)
    {}

    static Block bijection(Block ctr, Key key)
    {
        constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
        constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += w0;
            key[1] += w1;
        }
        return ctr;
    }

    std::uint32_t next_u32()
    {
        if (pos_ == 4) {
            buf_ = bijection({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32), rep_,
                              stream_},
                             key_);
            ++block_;
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    std::uint64_t next_u64()
    {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform on (0, 1), 53-bit resolution, never exactly 0 or 1.
    double uniform()
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        spare_ = rad * std::sin(ang);
        has_spare_ = true;
        return rad * std::cos(ang);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Uniform index in [0, bound) by Lemire's multiply-shift with rejection.
    std::uint64_t index(std::uint64_t bound)
    {
        if (bound <= 1) return 0;
        const std::uint32_t b = static_cast<std::uint32_t>(bound);
        std::uint64_t m = static_cast<std::uint64_t>(next_u32()) * b;
        auto low = static_cast<std::uint32_t>(m);
        if (low < b) {
            const std::uint32_t threshold = static_cast<std::uint32_t>(-b) % b;
            while (low < threshold) {
                m = static_cast<std::uint64_t>(next_u32()) * b;
                low = static_cast<std::uint32_t>(m);
            }
        }
        return m >> 32;
    }

    /// Random permutation of 0..n-1 (Fisher-Yates).
    std::vector<std::size_t> permutation(std::size_t n)
    {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[index(i)]);
        return idx;
    }

    /// k distinct indices from 0..n-1, in ascending order.
    std::vector<std::size_t> sample(std::size_t n, std::size_t k)
    {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k && i < n; ++i) std::swap(idx[i], idx[i + index(n - i)]);
        idx.resize(std::min(k, n));
        std::sort(idx.begin(), idx.end());
        return idx;
    }

private:
    Key key_;
    std::uint32_t rep_;
    std::uint32_t stream_;
    std::uint64_t block_ = 0;
    Block buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace dpdlasso
