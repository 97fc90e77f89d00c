#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "san/compensation.hpp"
#include "san/tensor.hpp"

namespace san {

enum class NormMethod { san, san_subset, exact, reshape, oracle_san, oracle_exact };

std::string to_string(NormMethod method);
NormMethod norm_method_from_string(const std::string& name);

/// Filter (out, in) and frequency bin (u, v) where a maximum was attained.
struct NormArgmax {
  std::size_t out = 0;
  std::size_t in = 0;
  std::size_t u = 0;
  std::size_t v = 0;
  friend bool operator==(const NormArgmax&, const NormArgmax&) = default;
};

struct NormEstimate {
  double value = 0.0;
  NormMethod method = NormMethod::san;
  std::size_t signal_h = 1;
  std::size_t signal_w = 1;
  double subset_rate = 1.0;
  double compensation = 1.0;
  std::optional<NormArgmax> argmax;
};

nlohmann::json to_json(const NormEstimate& estimate);

struct PowerIterationOptions {
  int max_iterations = 100;
  double relative_tolerance = 1e-10;
  std::uint64_t seed = 0x5A17;
};

/// Largest complex magnitude of the kernel's spectrum zero-padded to H x W:
/// the operator norm of single-channel cyclic convolution by it.
double kernel_fourier_max(PlaneView kernel, std::size_t height, std::size_t width);

/// max_{i,j} ||F{w_ij}||_inf, the largest amplification of any output
/// channel over inputs with one nonzero channel of unit norm. Ties go to the
/// lexicographically smallest (i, j, u, v).
NormEstimate san_norm(const KernelBank& bank, std::size_t height, std::size_t width);

/// `compensation` times the maximum over the filters of `plan` only.
NormEstimate san_subset_norm(const KernelBank& bank, std::size_t height, std::size_t width,
                             const SubsetPlan& plan, double compensation);

/// Largest m*n*H*W accepted by exact_conv_spectral_norm.
inline constexpr std::size_t kExactNormMaxEntries = std::size_t{1} << 24;

/// True operator norm of the multi-channel cyclic convolution: the max over
/// frequency bins of the top singular value of the m x n matrix of filter
/// spectra at that bin (power iteration on A^H A, 200 iterations or relative
/// change below 1e-10). Throws SizeGuardError above kExactNormMaxEntries.
NormEstimate exact_conv_spectral_norm(const KernelBank& bank, std::size_t height, std::size_t width);

/// Top singular value of the bank flattened to an m x (n*kh*kw) matrix.
NormEstimate reshape_spectral_norm(const KernelBank& bank, PowerIterationOptions options = {});

/// Top singular value of a rank-2 tensor by power iteration.
double dense_spectral_norm(const Tensor& matrix, PowerIterationOptions options = {});

namespace oracle {

/// Explicit matrices are capped at this many entries.
inline constexpr std::size_t kMaxEntries = 1'000'000;

/// (HW) x (HW) matrix M with M * vec(x) == vec(cyclic_conv2(x, w)).
Tensor build_circulant_matrix(PlaneView kernel, std::size_t height, std::size_t width);

/// (mHW) x (nHW) matrix whose action on a flattened [n,H,W] signal equals mimo_conv.
Tensor build_block_operator(const KernelBank& bank, std::size_t height, std::size_t width);

/// Dense power iteration on M^T M run to tight convergence.
double dense_top_singular_value(const Tensor& matrix);

/// max over filters of the top singular value of each explicit circulant.
double oracle_san_norm(const KernelBank& bank, std::size_t height, std::size_t width);

/// Top singular value of the explicit block operator.
double oracle_exact_norm(const KernelBank& bank, std::size_t height, std::size_t width);

}  // namespace oracle

}  // namespace san
