#pragma once

#include <torch/torch.h>

#include <vector>

#include "nowcast/hsr_data.hpp"

namespace nowcast {

// [N, 1, H, W] float tensor of normalized fields.
inline torch::Tensor to_tensor(const std::vector<const RainField*>& fields, double cap) {
  if (fields.empty()) throw DataError("no fields to stack");
  const auto& meta = fields.front()->meta;
  const auto h = static_cast<std::int64_t>(meta.height), w = static_cast<std::int64_t>(meta.width);
  auto out = torch::empty({static_cast<std::int64_t>(fields.size()), 1, h, w}, torch::kFloat32);
  auto* dst = out.data_ptr<float>();
  for (const RainField* f : fields) {
    if (f->meta.height != meta.height || f->meta.width != meta.width) throw DataError("fields differ in shape");
    const auto n = normalize(*f, cap);
    for (double v : n.values) *dst++ = static_cast<float>(v);
  }
  return out;
}

inline torch::Tensor to_tensor(const RainField& field, double cap) { return to_tensor({&field}, cap); }

// One [H, W] (or [1, 1, H, W]) normalized tensor back to mm/h. Values are
// clamped into [-1, 1] first.
inline RainField field_from_tensor(const torch::Tensor& t, const GridMeta& meta, Timestamp ts, double cap) {
  const auto flat = t.detach().to(torch::kFloat64).clamp(-1.0, 1.0).contiguous().reshape({-1});
  if (static_cast<std::size_t>(flat.numel()) != meta.cells()) throw DataError("tensor does not match grid");
  NormalizedField n{meta, ts, cap, {}};
  const double* p = flat.data_ptr<double>();
  n.values.assign(p, p + flat.numel());
  return denormalize(n);
}

struct PairTensors {
  torch::Tensor earlier;  // real t_i
  torch::Tensor later;    // real t_{i+step}

  std::int64_t size() const { return earlier.defined() ? earlier.size(0) : 0; }

  PairTensors select(const std::vector<std::int64_t>& idx) const {
    auto index = torch::tensor(idx, torch::kLong);
    return {earlier.index_select(0, index), later.index_select(0, index)};
  }
};

inline PairTensors pair_tensors(const std::vector<HsrPair>& pairs, double cap) {
  if (pairs.empty()) throw DataError("empty dataset: no training pairs");
  std::vector<const RainField*> a, b;
  for (const auto& p : pairs) {
    a.push_back(&p.earlier);
    b.push_back(&p.later);
  }
  return {to_tensor(a, cap), to_tensor(b, cap)};
}

}  // namespace nowcast
