#include "acm/fusion.hpp"

#include <algorithm>

namespace acm {

void FusionWeights::validate() const {
  if (theta_z.weights().shape() != theta_x.weights().shape())
    fail(ErrorCode::shape_mismatch, "theta_z " + shape_str(theta_z.weights().shape()) + " vs theta_x " +
                                        shape_str(theta_x.weights().shape()));
  if (prior && (*prior)[2].out_features() != out_channels())
    fail(ErrorCode::shape_mismatch, "prior branch width " + std::to_string((*prior)[2].out_features()) +
                                        " differs from P = " + std::to_string(out_channels()));
  if (prior && (*prior)[0].in_features() != 2)
    fail(ErrorCode::shape_mismatch, "prior branch must take (width, height)");
  if (norm) {
    norm->validate();
    if (norm->channels() != out_channels()) fail(ErrorCode::shape_mismatch, "norm channels differ from P");
  }
}

namespace {

void check_template(const Tensor& tmpl, const FusionWeights& w) {
  if (tmpl.rank() != 3) fail(ErrorCode::rank_error, "template must be rank 3");
  const ConvKernel& k = w.theta_z;
  if (tmpl.dim(0) != k.in_channels() || tmpl.dim(1) != k.kh() || tmpl.dim(2) != k.kw())
    fail(ErrorCode::shape_mismatch, "template " + shape_str(tmpl.shape()) + " must match kernel " +
                                        shape_str(k.weights().shape()) + " in channels and spatial size");
}

Tensor finish(Tensor pre, const FusionWeights& w, bool apply_relu) {
  if (w.norm && w.norm_order == NormOrder::before_relu) pre = batchnorm_infer(pre, *w.norm);
  if (apply_relu) pre = relu(pre);
  if (w.norm && w.norm_order == NormOrder::after_relu) pre = batchnorm_infer(pre, *w.norm);
  return pre;
}

}  // namespace

Tensor naive_concat_corr(const Tensor& tmpl, const Tensor& search, const FusionWeights& w,
                         const ComputeOptions& opts) {
  w.validate();
  check_template(tmpl, w);
  if (search.rank() != 3) fail(ErrorCode::rank_error, "search must be rank 3");
  const std::size_t C = tmpl.dim(0), eh = tmpl.dim(1), ew = tmpl.dim(2), P = w.out_channels();
  if (search.dim(0) != C) fail(ErrorCode::shape_mismatch, "search channels differ from template");
  if (eh > search.dim(1) || ew > search.dim(2))
    fail(ErrorCode::kernel_too_large, "template larger than search map");

  // [theta_z theta_x] joined along the input-channel axis
  Tensor joined({P, 2 * C, eh, ew});
  const std::size_t kblock = C * eh * ew;
  for (std::size_t p = 0; p < P; ++p) {
    std::copy_n(w.theta_z.weights().ptr() + p * kblock, kblock, joined.ptr() + (2 * p) * kblock);
    std::copy_n(w.theta_x.weights().ptr() + p * kblock, kblock, joined.ptr() + (2 * p + 1) * kblock);
  }
  const ConvKernel joined_kernel(std::move(joined));

  const std::size_t Ho = search.dim(1) - eh + 1, Wo = search.dim(2) - ew + 1;
  Tensor out({P, Ho, Wo});
  Tensor stacked({2 * C, eh, ew});
  std::copy_n(tmpl.ptr(), kblock, stacked.ptr());
  for (std::size_t i = 0; i < Ho; ++i)
    for (std::size_t j = 0; j < Wo; ++j) {
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t u = 0; u < eh; ++u)
          for (std::size_t v = 0; v < ew; ++v) stacked.at(C + c, u, v) = search.at(c, i + u, j + v);
      const Tensor r = conv2d_valid(stacked, joined_kernel, opts);  // [P, 1, 1]
      for (std::size_t p = 0; p < P; ++p) out.at(p, i, j) = r[p];
    }
  return out;
}

Tensor prior_embedding(const FusionWeights& w, const std::optional<BoxSize>& box) {
  if (!w.prior) fail(ErrorCode::invalid_argument, "no prior branch configured");
  if (!box) fail(ErrorCode::missing_box, "prior branch configured but no box given");
  if (!(box->width > 0.0f) || !(box->height > 0.0f))
    fail(ErrorCode::non_positive_box, "box width and height must be positive");
  const Tensor input = Tensor::from({2}, {box->width / w.box_scale, box->height / w.box_scale});
  const Tensor e = mlp3_forward(input, *w.prior);
  return e.reshaped({e.numel(), 1, 1});
}

TemplateCache acm_cache_template(const Tensor& tmpl, const FusionWeights& w, const std::optional<BoxSize>& box,
                                 const ComputeOptions& opts) {
  w.validate();
  check_template(tmpl, w);
  TemplateCache cache{conv2d_valid(tmpl, w.theta_z, opts), std::nullopt};
  if (w.prior) {
    cache.prior_term = prior_embedding(w, box);
    if (opts.stats) opts.stats->fc_calls += 3;
  }
  return cache;
}

Tensor acm_apply_search(const TemplateCache& cache, const Tensor& search, const FusionWeights& w,
                        bool apply_relu, const ComputeOptions& opts) {
  if (cache.z_term.shape() != Shape{w.out_channels(), 1, 1})
    fail(ErrorCode::shape_mismatch, "cache z_term " + shape_str(cache.z_term.shape()) + " incompatible with weights");
  if (w.prior.has_value() != cache.prior_term.has_value())
    fail(ErrorCode::shape_mismatch, "cache prior term does not match the weights' prior branch");
  Tensor pre = broadcast_add(conv2d_valid(search, w.theta_x, opts), cache.z_term);
  if (cache.prior_term) pre = broadcast_add(pre, *cache.prior_term);
  return finish(std::move(pre), w, apply_relu);
}

Tensor acm_forward(const Tensor& tmpl, const Tensor& search, const FusionWeights& w,
                   const std::optional<BoxSize>& box, bool apply_relu, const ComputeOptions& opts) {
  return acm_apply_search(acm_cache_template(tmpl, w, box, opts), search, w, apply_relu, opts);
}

}  // namespace acm
