#include "ietlab/orbit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "ietlab/error.hpp"
#include "ietlab/parallel.hpp"

namespace ietlab {

namespace {

constexpr double kBelowOne = 0x1.fffffffffffffp-1;
constexpr std::size_t kLanes = 32;
// Plain per-lane partial sums are folded into Kahan totals every kBlock steps.
constexpr std::uint64_t kBlock = 1024;
constexpr std::size_t kMaxFunctions = 2;
constexpr std::size_t kVectorWidth = 8;

struct KernelTables {
  std::size_t d = 0;
  std::size_t stride = 0;       // max(d, 8); tables are zero padded
  std::vector<double> lefts;    // interior breakpoints left_1..left_{d-1}
  std::vector<double> offsets;
  std::vector<double> a;        // [function][interval]
  std::vector<double> b;
};

struct LaneState {
  alignas(64) std::array<double, kLanes> x{};
  alignas(64) std::array<double, kMaxFunctions * kLanes> block{};
  alignas(64) std::array<double, kMaxFunctions * kLanes> sum{};
  alignas(64) std::array<double, kMaxFunctions * kLanes> comp{};

  void fold(std::size_t functions) {
    for (std::size_t k = 0; k < functions * kLanes; ++k) {
      const double y = block[k] - comp[k];
      const double t = sum[k] + y;
      comp[k] = (t - sum[k]) - y;
      sum[k] = t;
      block[k] = 0.0;
    }
  }
};

// Every lane performs the same IEEE operations as the vector path (multiply,
// then add, never fused), so the two paths agree bit for bit.
template <std::size_t F, std::size_t D>
void scalar_steps(const KernelTables& tab, LaneState& st, std::uint64_t steps) {
  const std::size_t nb = (D > 0 ? D : tab.d) - 1;
  const double* __restrict lefts = tab.lefts.data();
  const double* __restrict off = tab.offsets.data();
  const double* __restrict a = tab.a.data();
  const double* __restrict b = tab.b.data();
  const std::size_t stride = tab.stride;
  double x[kLanes];
  double acc[F * kLanes];
  std::copy_n(st.x.data(), kLanes, x);
  std::copy_n(st.block.data(), F * kLanes, acc);
  for (std::uint64_t s = 0; s < steps; ++s) {
#pragma GCC unroll 16
    for (std::size_t l = 0; l < kLanes; ++l) {
      const double xl = x[l];
      std::size_t i = 0;
      if constexpr (D > 0) {
        for (std::size_t j = 0; j < nb; ++j) i += (xl >= lefts[j]);
      } else {
        i = static_cast<std::size_t>(std::upper_bound(lefts, lefts + nb, xl) - lefts);
      }
      for (std::size_t f = 0; f < F; ++f) {
        const double prod = a[f * stride + i] * xl;
        acc[f * kLanes + l] += prod + b[f * stride + i];
      }
      const double xn = xl + off[i];
      x[l] = std::min(xn > 0.0 ? xn : 0.0, kBelowOne);
    }
  }
  std::copy_n(x, kLanes, st.x.data());
  std::copy_n(acc, F * kLanes, st.block.data());
}

#if defined(__AVX512F__)
// Tables of at most eight entries sit in one zmm register each, so lookups are
// in-register permutes rather than gathers. Four independent groups of eight
// lanes hide the latency of one step.
template <std::size_t F>
void vector_steps(const KernelTables& tab, LaneState& st, std::uint64_t steps) {
  constexpr std::size_t G = kLanes / kVectorWidth;
  const std::size_t nb = tab.d - 1;
  const __m512d offv = _mm512_loadu_pd(tab.offsets.data());
  __m512d av[F];
  __m512d bv[F];
  for (std::size_t f = 0; f < F; ++f) {
    av[f] = _mm512_loadu_pd(tab.a.data() + f * tab.stride);
    bv[f] = _mm512_loadu_pd(tab.b.data() + f * tab.stride);
  }
  __m512d lv[kVectorWidth - 1];
  for (std::size_t j = 0; j < nb; ++j) lv[j] = _mm512_set1_pd(tab.lefts[j]);
  const __m512i one = _mm512_set1_epi64(1);
  const __m512d zero = _mm512_setzero_pd();
  const __m512d top = _mm512_set1_pd(kBelowOne);

  __m512d x[G];
  __m512d acc[F][G];
  for (std::size_t g = 0; g < G; ++g) {
    x[g] = _mm512_load_pd(st.x.data() + kVectorWidth * g);
    for (std::size_t f = 0; f < F; ++f)
      acc[f][g] = _mm512_load_pd(st.block.data() + f * kLanes + kVectorWidth * g);
  }
  for (std::uint64_t s = 0; s < steps; ++s) {
#pragma GCC unroll 4
    for (std::size_t g = 0; g < G; ++g) {
      __m512i idx = _mm512_setzero_si512();
      for (std::size_t j = 0; j < nb; ++j) {
        const __mmask8 m = _mm512_cmp_pd_mask(x[g], lv[j], _CMP_GE_OQ);
        idx = _mm512_mask_add_epi64(idx, m, idx, one);
      }
      for (std::size_t f = 0; f < F; ++f) {
        const __m512d prod = _mm512_mul_pd(_mm512_permutexvar_pd(idx, av[f]), x[g]);
        acc[f][g] = _mm512_add_pd(acc[f][g], _mm512_add_pd(prod, _mm512_permutexvar_pd(idx, bv[f])));
      }
      const __m512d xn = _mm512_add_pd(x[g], _mm512_permutexvar_pd(idx, offv));
      x[g] = _mm512_min_pd(_mm512_max_pd(xn, zero), top);
    }
  }
  for (std::size_t g = 0; g < G; ++g) {
    _mm512_store_pd(st.x.data() + kVectorWidth * g, x[g]);
    for (std::size_t f = 0; f < F; ++f)
      _mm512_store_pd(st.block.data() + f * kLanes + kVectorWidth * g, acc[f][g]);
  }
}
#endif

template <std::size_t F>
void advance(const KernelTables& tab, LaneState& st, std::uint64_t steps) {
#if defined(__AVX512F__)
  if (tab.d <= kVectorWidth) return vector_steps<F>(tab, st, steps);
#endif
  switch (tab.d) {
    case 2: return scalar_steps<F, 2>(tab, st, steps);
    case 3: return scalar_steps<F, 3>(tab, st, steps);
    case 4: return scalar_steps<F, 4>(tab, st, steps);
    case 5: return scalar_steps<F, 5>(tab, st, steps);
    case 6: return scalar_steps<F, 6>(tab, st, steps);
    case 7: return scalar_steps<F, 7>(tab, st, steps);
    case 8: return scalar_steps<F, 8>(tab, st, steps);
    default: return scalar_steps<F, 0>(tab, st, steps);
  }
}

template <std::size_t F>
void run_range(const KernelTables& tab, std::span<const double> xs,
               std::span<const std::uint64_t> checkpoints, std::size_t f0, std::size_t total_functions,
               std::size_t begin, std::size_t end, std::vector<double>& out) {
  const std::size_t nc = checkpoints.size();
  for (std::size_t base = begin; base < end; base += kLanes) {
    const std::size_t lanes = std::min(kLanes, end - base);
    LaneState st;
    st.x.fill(0.5);
    for (std::size_t l = 0; l < lanes; ++l) st.x[l] = xs[base + l];
    std::uint64_t done = 0;
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::uint64_t remaining = checkpoints[c] - done; remaining > 0;) {
        const std::uint64_t chunk = std::min(remaining, kBlock);
        advance<F>(tab, st, chunk);
        st.fold(F);
        remaining -= chunk;
      }
      done = checkpoints[c];
      for (std::size_t l = 0; l < lanes; ++l)
        for (std::size_t f = 0; f < F; ++f)
          out[((base + l) * total_functions + f0 + f) * nc + c] =
              st.sum[f * kLanes + l] - st.comp[f * kLanes + l];
    }
  }
}

}  // namespace

std::vector<double> BirkhoffTable::column(std::size_t function, std::size_t checkpoint) const {
  std::vector<double> col(points);
  for (std::size_t p = 0; p < points; ++p) col[p] = at(p, function, checkpoint);
  return col;
}

BirkhoffTable birkhoff_sums(const Iet& t, std::span<const PiecewiseFunction> fs,
                            std::span<const double> xs, std::span<const std::uint64_t> checkpoints,
                            unsigned threads) {
  for (const auto& f : fs) f.check_compatible(t);
  for (std::size_t c = 1; c < checkpoints.size(); ++c)
    if (checkpoints[c] < checkpoints[c - 1])
      throw Error(Errc::InvalidArgument, "checkpoints must be non-decreasing");
  for (double x : xs)
    if (!(x >= 0.0 && x < t.total_length()))
      throw Error(Errc::OutOfDomain, "starting point outside [0, |I|)");

  BirkhoffTable table;
  table.points = xs.size();
  table.functions = fs.size();
  table.checkpoints = checkpoints.size();
  table.values.assign(table.points * table.functions * table.checkpoints, 0.0);
  if (table.values.empty()) return table;

  const std::size_t d = t.size();
  // Observables are processed in pairs; each pass re-walks the same orbits.
  for (std::size_t f0 = 0; f0 < fs.size(); f0 += kMaxFunctions) {
    const std::size_t nf = std::min(kMaxFunctions, fs.size() - f0);
    KernelTables tab;
    tab.d = d;
    tab.stride = std::max(d, kVectorWidth);
    tab.lefts.assign(t.lefts().begin() + 1, t.lefts().end());
    tab.offsets.assign(tab.stride, 0.0);
    std::copy(t.offsets().begin(), t.offsets().end(), tab.offsets.begin());
    tab.a.assign(nf * tab.stride, 0.0);
    tab.b.assign(nf * tab.stride, 0.0);
    for (std::size_t f = 0; f < nf; ++f) {
      std::copy(fs[f0 + f].a().begin(), fs[f0 + f].a().end(), tab.a.begin() + f * tab.stride);
      std::copy(fs[f0 + f].b().begin(), fs[f0 + f].b().end(), tab.b.begin() + f * tab.stride);
    }
    // Chunks are whole lane groups so the lane padding never depends on threads.
    const std::size_t groups = (xs.size() + kLanes - 1) / kLanes;
    parallel_for(groups, threads, [&](std::size_t gb, std::size_t ge) {
      const std::size_t begin = gb * kLanes;
      const std::size_t end = std::min(ge * kLanes, xs.size());
      if (nf == 2)
        run_range<2>(tab, xs, checkpoints, f0, fs.size(), begin, end, table.values);
      else
        run_range<1>(tab, xs, checkpoints, f0, fs.size(), begin, end, table.values);
    });
  }
  return table;
}

std::vector<std::uint64_t> log_spaced(std::uint64_t lo, std::uint64_t hi, std::size_t n) {
  if (lo == 0 || hi < lo || n == 0) throw Error(Errc::InvalidArgument, "log_spaced needs 0 < lo <= hi, n >= 1");
  if (n == 1) return {hi};
  std::set<std::uint64_t> values;
  const double l0 = std::log(static_cast<double>(lo));
  const double l1 = std::log(static_cast<double>(hi));
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::exp(l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(n - 1));
    values.insert(std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::llround(v)), lo, hi));
  }
  return {values.begin(), values.end()};
}

}  // namespace ietlab
