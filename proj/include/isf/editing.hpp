#pragma once

#include <optional>
#include <vector>

#include "isf/isf_net.hpp"
#include "isf/metrics.hpp"

namespace isf {

// An edit plus the noise that produced it, so any result can be replayed.
template <class T>
struct EditResult {
  LatentCode<T> code;
  NoiseVector<T> z;
};

// w* = M(w, z, d_target). When no z is supplied a fresh one is drawn and
// returned with the code. Any number of attributes may change at once.
template <class T>
EditResult<T> manipulate(const LatentCode<T>& w,
                         const AttributeVector<T>& d_target,
                         std::optional<NoiseVector<T>> z,
                         const IsfParams<T>& params, Rng* rng = nullptr) {
  if (!z) {
    if (!rng) {
      throw InvalidArgument("manipulate: need either an explicit z or an rng");
    }
    z = sample_noise<T>(params.dims.n, *rng);
  }
  EditResult<T> out;
  out.code = isf_forward(w, *z, d_target, params);
  out.z = std::move(*z);
  return out;
}

// count edits of one code under independent noise draws
template <class T>
std::vector<EditResult<T>> sample_modes(const LatentCode<T>& w,
                                        const AttributeVector<T>& d_target,
                                        int count, const IsfParams<T>& params,
                                        Rng& rng) {
  if (count < 1) throw InvalidArgument("sample_modes: count must be >= 1");
  std::vector<EditResult<T>> out;
  out.reserve(size_t(count));
  for (int i = 0; i < count; ++i) {
    out.push_back(manipulate<T>(w, d_target, std::nullopt, params, &rng));
  }
  return out;
}

// Linear path s_t = w_src + (t/T)(w_dst - w_src), endpoints stored exactly.
template <class T>
InterpolationPath<T> build_path(const LatentCode<T>& w_src,
                                const LatentCode<T>& w_dst, int steps,
                                int attribute_edited = -1) {
  if (steps < 2) throw InvalidArgument("build_path: need T >= 2");
  if (w_src.rows() != w_dst.rows() || w_src.cols() != w_dst.cols()) {
    throw InvalidArgument("build_path: endpoint shape mismatch");
  }
  InterpolationPath<T> path;
  path.source = w_src;
  path.target = w_dst;
  path.attribute_edited = attribute_edited;
  path.codes.reserve(size_t(steps) + 1);
  path.codes.push_back(w_src);
  for (int t = 1; t < steps; ++t) {
    path.codes.push_back(lerp_code(w_src, w_dst, T(double(t) / double(steps))));
  }
  path.codes.push_back(w_dst);
  return path;
}

}  // namespace isf
