#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace anchorci {

// Thrown when an iterative numerical routine fails to reach its tolerance.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inverse CDF of the standard normal distribution (Wichura's algorithm),
// absolute accuracy well below 1e-9 over (0,1).
double normal_quantile(double prob);

// Adaptive Gauss-Kronrod (7/15) quadrature of f over [a,b] to absolute
// tolerance abs_tol. Throws NumericalError if the interval stack exhausts
// without convergence.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol);

// Monotone cubic interpolant (Fritsch-Carlson) on a strictly increasing grid.
// Preserves monotonicity of the data, which keeps interpolated transforms
// order-consistent with their exact values.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y);

    double operator()(double x) const;
    bool empty() const { return x_.empty(); }
    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

private:
    std::vector<double> x_, y_, slope_;
};

// SplitMix64: cheap, well-mixed stream used to derive independent
// per-replicate seeds from a master seed.
std::uint64_t splitmix64(std::uint64_t state);

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
}

}  // namespace anchorci
