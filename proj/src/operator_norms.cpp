#include "san/operator_norms.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "san/errors.hpp"
#include "san/fft.hpp"
#include "san/rng.hpp"

namespace san {

namespace {

using cplx = std::complex<double>;

double abs2(double x) { return x * x; }
double abs2(const cplx& z) { return std::norm(z); }

template <class T>
T random_entry(CounterRng& rng) {
  if constexpr (std::is_same_v<T, cplx>)
    return cplx(rng.normal(), rng.normal());
  else
    return rng.normal();
}

/// Power iteration for the top singular value of an operator A given by
/// `apply` (x -> A x, into `image`) and `adjoint` (y -> A^H y, into `out`).
/// Returns ||A v|| for the final unit vector v.
template <class T, class Apply, class Adjoint>
double top_singular_value(std::size_t cols, std::size_t rows, Apply apply, Adjoint adjoint,
                          const PowerIterationOptions& options) {
  CounterRng rng(options.seed);
  std::vector<T> v(cols), image(rows), back(cols);
  for (auto& x : v) x = random_entry<T>(rng);

  auto normalize = [](std::vector<T>& x) {
    double s = 0.0;
    for (const auto& e : x) s += abs2(e);
    const double n = std::sqrt(s);
    if (n > 0.0)
      for (auto& e : x) e /= n;
    return n;
  };
  if (normalize(v) == 0.0) return 0.0;

  double sigma = 0.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    apply(v, image);
    double s = 0.0;
    for (const auto& e : image) s += abs2(e);
    const double next = std::sqrt(s);
    const bool converged =
        it > 0 && std::abs(next - sigma) <= options.relative_tolerance * std::max(next, 1e-300);
    sigma = next;
    if (sigma == 0.0 || converged) break;
    adjoint(image, back);
    v.swap(back);
    if (normalize(v) == 0.0) break;
  }
  return sigma;
}

void check_fit(const KernelBank& bank, std::size_t height, std::size_t width) {
  if (bank.kernel_height() > height || bank.kernel_width() > width)
    throw DimensionError("kernel " + std::to_string(bank.kernel_height()) + "x" +
                         std::to_string(bank.kernel_width()) + " does not fit a " +
                         std::to_string(height) + "x" + std::to_string(width) + " plane");
}

/// Spectra of all filters, [filter][bin] with filter = out * n + in.
std::vector<std::vector<cplx>> filter_spectra(const KernelBank& bank, std::size_t height,
                                              std::size_t width) {
  std::vector<std::vector<cplx>> spectra;
  spectra.reserve(bank.filter_count());
  for (std::size_t i = 0; i < bank.out_channels(); ++i) {
    for (std::size_t j = 0; j < bank.in_channels(); ++j) {
      const auto s = fft2(bank.filter(i, j), height, width);
      std::vector<cplx> grid(height * width);
      for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = cplx(s.re()[k], s.im()[k]);
      spectra.push_back(std::move(grid));
    }
  }
  return spectra;
}

struct FilterPeak {
  double value = -1.0;
  std::size_t u = 0;
  std::size_t v = 0;
};

FilterPeak spectrum_peak(PlaneView kernel, std::size_t height, std::size_t width) {
  const auto s = fft2(kernel, height, width);
  FilterPeak peak;
  for (std::size_t u = 0; u < height; ++u)
    for (std::size_t v = 0; v < width; ++v) {
      const double mag = s.magnitude(u, v);
      if (mag > peak.value) peak = {mag, u, v};
    }
  return peak;
}

}  // namespace

std::string to_string(NormMethod method) {
  switch (method) {
    case NormMethod::san: return "san";
    case NormMethod::san_subset: return "san_subset";
    case NormMethod::exact: return "exact";
    case NormMethod::reshape: return "reshape";
    case NormMethod::oracle_san: return "oracle_san";
    case NormMethod::oracle_exact: return "oracle_exact";
  }
  return "unknown";
}

NormMethod norm_method_from_string(const std::string& name) {
  for (auto m : {NormMethod::san, NormMethod::san_subset, NormMethod::exact, NormMethod::reshape,
                 NormMethod::oracle_san, NormMethod::oracle_exact})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown norm method '" + name + "'");
}

nlohmann::json to_json(const NormEstimate& e) {
  nlohmann::json j;
  j["value"] = e.value;
  j["method"] = to_string(e.method);
  j["signal_h"] = e.signal_h;
  j["signal_w"] = e.signal_w;
  j["subset_rate"] = e.subset_rate;
  j["compensation"] = e.compensation;
  if (e.argmax)
    j["argmax"] = {e.argmax->out, e.argmax->in, e.argmax->u, e.argmax->v};
  else
    j["argmax"] = nullptr;
  return j;
}

double kernel_fourier_max(PlaneView kernel, std::size_t height, std::size_t width) {
  return spectrum_peak(kernel, height, width).value;
}

NormEstimate san_norm(const KernelBank& bank, std::size_t height, std::size_t width) {
  check_fit(bank, height, width);
  NormEstimate e;
  e.method = NormMethod::san;
  e.signal_h = height;
  e.signal_w = width;
  double best = -1.0;
  // Strict comparison while scanning in (i, j, u, v) order keeps the
  // lexicographically first maximizer.
  for (std::size_t i = 0; i < bank.out_channels(); ++i)
    for (std::size_t j = 0; j < bank.in_channels(); ++j) {
      const auto peak = spectrum_peak(bank.filter(i, j), height, width);
      if (peak.value > best) {
        best = peak.value;
        e.argmax = NormArgmax{i, j, peak.u, peak.v};
      }
    }
  e.value = best;
  return e;
}

NormEstimate san_subset_norm(const KernelBank& bank, std::size_t height, std::size_t width,
                             const SubsetPlan& plan, double compensation) {
  check_fit(bank, height, width);
  if (plan.total != bank.filter_count())
    throw DimensionError("subset plan covers " + std::to_string(plan.total) + " filters, bank has " +
                         std::to_string(bank.filter_count()));
  if (plan.indices.empty()) throw std::invalid_argument("san_subset_norm: empty subset");
  if (!(compensation >= 1.0)) throw std::invalid_argument("compensation must be >= 1");
  NormEstimate e;
  e.method = NormMethod::san_subset;
  e.signal_h = height;
  e.signal_w = width;
  e.subset_rate = plan.rate;
  e.compensation = compensation;
  double best = -1.0;
  const std::size_t n = bank.in_channels();
  for (std::size_t index : plan.indices) {
    if (index >= plan.total) throw DimensionError("subset index out of range");
    const auto peak = spectrum_peak(bank.filter(index / n, index % n), height, width);
    if (peak.value > best) {
      best = peak.value;
      e.argmax = NormArgmax{index / n, index % n, peak.u, peak.v};
    }
  }
  e.value = compensation * best;
  return e;
}

NormEstimate exact_conv_spectral_norm(const KernelBank& bank, std::size_t height, std::size_t width) {
  check_fit(bank, height, width);
  const std::size_t m = bank.out_channels(), n = bank.in_channels(), bins = height * width;
  if (m * n * bins > kExactNormMaxEntries)
    throw SizeGuardError("exact spectral norm of a " + std::to_string(m) + "x" + std::to_string(n) +
                         " bank at " + std::to_string(height) + "x" + std::to_string(width) +
                         " needs " + std::to_string(m * n * bins) + " spectrum entries, limit is " +
                         std::to_string(kExactNormMaxEntries));
  const auto spectra = filter_spectra(bank, height, width);

  NormEstimate e;
  e.method = NormMethod::exact;
  e.signal_h = height;
  e.signal_w = width;
  double best = -1.0;
  std::vector<cplx> a(m * n);
  for (std::size_t bin = 0; bin < bins; ++bin) {
    for (std::size_t f = 0; f < m * n; ++f) a[f] = spectra[f][bin];
    auto apply = [&](const std::vector<cplx>& x, std::vector<cplx>& y) {
      for (std::size_t i = 0; i < m; ++i) {
        cplx acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += a[i * n + j] * x[j];
        y[i] = acc;
      }
    };
    auto adjoint = [&](const std::vector<cplx>& y, std::vector<cplx>& x) {
      for (std::size_t j = 0; j < n; ++j) x[j] = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) x[j] += std::conj(a[i * n + j]) * y[i];
    };
    PowerIterationOptions opts{200, 1e-10, derive_seed(0xE7AC7, bin)};
    const double sigma = top_singular_value<cplx>(n, m, apply, adjoint, opts);
    if (sigma > best) {
      best = sigma;
      e.argmax = NormArgmax{0, 0, bin / width, bin % width};
    }
  }
  e.value = best;
  return e;
}

double dense_spectral_norm(const Tensor& matrix, PowerIterationOptions options) {
  if (matrix.rank() != 2)
    throw DimensionError("dense_spectral_norm needs a matrix, got " + shape_string(matrix.shape()));
  const std::size_t rows = matrix.dim(0), cols = matrix.dim(1);
  const double* a = matrix.data();
  for (double v : matrix.values())
    if (!std::isfinite(v)) throw std::invalid_argument("dense_spectral_norm: non-finite entry");
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += a[i * cols + j] * x[j];
      y[i] = acc;
    }
  };
  auto adjoint = [&](const std::vector<double>& y, std::vector<double>& x) {
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) x[j] += a[i * cols + j] * y[i];
  };
  return top_singular_value<double>(cols, rows, apply, adjoint, options);
}

NormEstimate reshape_spectral_norm(const KernelBank& bank, PowerIterationOptions options) {
  const Tensor& t = bank.tensor();
  NormEstimate e;
  e.method = NormMethod::reshape;
  e.value = dense_spectral_norm(t.reshaped({bank.out_channels(), t.size() / bank.out_channels()}),
                                options);
  return e;
}

namespace oracle {

namespace {
void guard(std::size_t rows, std::size_t cols) {
  if (rows * cols > kMaxEntries)
    throw SizeGuardError("explicit operator of " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " exceeds the oracle limit of " + std::to_string(kMaxEntries) + " entries");
}
}  // namespace

Tensor build_circulant_matrix(PlaneView kernel, std::size_t height, std::size_t width) {
  KernelBank bank(1, 1, kernel.rows, kernel.cols);
  std::copy(kernel.values.begin(), kernel.values.end(), bank.tensor().values().begin());
  return build_block_operator(bank, height, width);
}

Tensor build_block_operator(const KernelBank& bank, std::size_t height, std::size_t width) {
  check_fit(bank, height, width);
  const std::size_t m = bank.out_channels(), n = bank.in_channels(), hw = height * width;
  guard(m * hw, n * hw);
  const std::size_t kh = bank.kernel_height(), kw = bank.kernel_width();
  Tensor op({m * hw, n * hw});
  const std::size_t cols = n * hw;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const PlaneView w = bank.filter(i, j);
      for (std::size_t p = 0; p < height; ++p)
        for (std::size_t q = 0; q < width; ++q)
          for (std::size_t r = 0; r < height; ++r)
            for (std::size_t s = 0; s < width; ++s) {
              const std::size_t a = (p + height - r) % height;
              const std::size_t b = (q + width - s) % width;
              if (a < kh && b < kw)
                op[(i * hw + p * width + q) * cols + j * hw + r * width + s] = w(a, b);
            }
    }
  return op;
}

double dense_top_singular_value(const Tensor& matrix) {
  if (matrix.rank() != 2) throw DimensionError("dense_top_singular_value needs a matrix");
  guard(matrix.dim(0), matrix.dim(1));
  return dense_spectral_norm(matrix, PowerIterationOptions{20000, 1e-15, 0x0AC1E});
}

double oracle_san_norm(const KernelBank& bank, std::size_t height, std::size_t width) {
  double best = 0.0;
  for (std::size_t i = 0; i < bank.out_channels(); ++i)
    for (std::size_t j = 0; j < bank.in_channels(); ++j)
      best = std::max(best, dense_top_singular_value(build_circulant_matrix(bank.filter(i, j), height, width)));
  return best;
}

double oracle_exact_norm(const KernelBank& bank, std::size_t height, std::size_t width) {
  return dense_top_singular_value(build_block_operator(bank, height, width));
}

}  // namespace oracle

}  // namespace san
