#pragma once

#include <cstdint>
#include <stdexcept>

namespace treescm {

// Largest 62-bit prime, 2^62 - 57.
inline constexpr std::uint64_t kDefaultPrime = 4611686018427387847ULL;

inline std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

inline std::uint64_t pow_mod(std::uint64_t a, std::uint64_t e, std::uint64_t m) {
    std::uint64_t r = 1 % m;
    a %= m;
    while (e) {
        if (e & 1) r = mul_mod(r, a, m);
        a = mul_mod(a, a, m);
        e >>= 1;
    }
    return r;
}

// Deterministic Miller-Rabin for 64-bit inputs.
inline bool is_prime_u64(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
        if (n % p == 0) return n == p;
    }
    std::uint64_t d = n - 1;
    int s = 0;
    while ((d & 1) == 0) { d >>= 1; ++s; }
    for (std::uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
        std::uint64_t x = pow_mod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int r = 1; r < s; ++r) {
            x = mul_mod(x, x, n);
            if (x == n - 1) { composite = false; break; }
        }
        if (composite) return false;
    }
    return true;
}

// Arithmetic modulo a fixed odd prime. Values are canonical residues in [0, p).
class PrimeField {
public:
    explicit PrimeField(std::uint64_t p) : p_(p) {
        if (!is_prime_u64(p)) throw std::invalid_argument("PrimeField: modulus is not prime");
    }

    std::uint64_t modulus() const { return p_; }

    std::uint64_t add(std::uint64_t a, std::uint64_t b) const {
        std::uint64_t s = a + b;          // p < 2^63 so no overflow
        return s >= p_ ? s - p_ : s;
    }
    std::uint64_t sub(std::uint64_t a, std::uint64_t b) const {
        return a >= b ? a - b : a + p_ - b;
    }
    std::uint64_t neg(std::uint64_t a) const { return a == 0 ? 0 : p_ - a; }
    std::uint64_t mul(std::uint64_t a, std::uint64_t b) const { return mul_mod(a, b, p_); }
    std::uint64_t pow(std::uint64_t a, std::uint64_t e) const { return pow_mod(a, e, p_); }

    std::uint64_t inv(std::uint64_t a) const {
        if (a == 0) throw std::domain_error("PrimeField: inverse of zero");
        return pow(a, p_ - 2);
    }
    std::uint64_t div(std::uint64_t a, std::uint64_t b) const { return mul(a, inv(b)); }

    std::uint64_t from_int(long long v) const {
        long long r = v % static_cast<long long>(p_);
        if (r < 0) r += static_cast<long long>(p_);
        return static_cast<std::uint64_t>(r);
    }

    bool is_square(std::uint64_t a) const {
        if (a == 0) return true;
        return pow(a, (p_ - 1) / 2) == 1;
    }

    // Tonelli-Shanks. Requires a to be a quadratic residue.
    std::uint64_t sqrt(std::uint64_t a) const {
        if (a == 0) return 0;
        if (!is_square(a)) throw std::domain_error("PrimeField: sqrt of non-residue");
        if ((p_ & 3) == 3) return pow(a, (p_ + 1) / 4);
        std::uint64_t q = p_ - 1;
        int s = 0;
        while ((q & 1) == 0) { q >>= 1; ++s; }
        std::uint64_t z = 2;
        while (is_square(z)) ++z;
        std::uint64_t m = s;
        std::uint64_t c = pow(z, q);
        std::uint64_t t = pow(a, q);
        std::uint64_t r = pow(a, (q + 1) / 2);
        while (t != 1) {
            std::uint64_t t2 = t;
            std::uint64_t i = 0;
            while (t2 != 1) { t2 = mul(t2, t2); ++i; }
            std::uint64_t b = c;
            for (std::uint64_t k = 0; k + i + 1 < m; ++k) b = mul(b, b);
            m = i;
            c = mul(b, b);
            t = mul(t, c);
            r = mul(r, b);
        }
        return r;
    }

    bool operator==(const PrimeField& o) const { return p_ == o.p_; }

private:
    std::uint64_t p_;
};

}  // namespace treescm
