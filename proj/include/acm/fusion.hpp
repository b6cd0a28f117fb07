#pragma once

#include <optional>

#include "acm/nn_ops.hpp"

namespace acm {

// Width and height of the initial-frame bounding box, in pixels.
struct BoxSize {
  float width = 0.0f;
  float height = 0.0f;
};

enum class NormOrder { before_relu, after_relu };

// Asymmetric convolution weights. theta_z and theta_x share the shape
// [P, C, eta, omega], where eta x omega is the template's spatial size, so
// theta_z * template collapses to [P, 1, 1] and broadcasts over the search
// response.
struct FusionWeights {
  ConvKernel theta_z;
  ConvKernel theta_x;
  std::optional<Mlp3> prior;             // (w, h) -> P, optional
  std::optional<BatchNormParams> norm;   // over P channels, optional
  NormOrder norm_order = NormOrder::before_relu;
  float box_scale = 255.0f;              // box sides are divided by this before the MLP

  std::size_t out_channels() const { return theta_z.out_channels(); }
  void validate() const;
};

struct TemplateCache {
  Tensor z_term;                     // [P, 1, 1]
  std::optional<Tensor> prior_term;  // [P, 1, 1]
};

// Brute-force reference: for every template-sized window of the search map,
// stack [template; window] along channels (template first) and convolve with
// the joined [P, 2C, eta, omega] kernel. Linear: no norm, no ReLU.
Tensor naive_concat_corr(const Tensor& tmpl, const Tensor& search, const FusionWeights& w,
                         const ComputeOptions& opts = {});

// Prior embedding reshaped to [P, 1, 1]. MissingBox / NonPositiveBox.
Tensor prior_embedding(const FusionWeights& w, const std::optional<BoxSize>& box);

// theta_z * z (+b) theta_x * x (+b) prior, then optional norm and ReLU.
Tensor acm_forward(const Tensor& tmpl, const Tensor& search, const FusionWeights& w,
                   const std::optional<BoxSize>& box, bool apply_relu, const ComputeOptions& opts = {});

TemplateCache acm_cache_template(const Tensor& tmpl, const FusionWeights& w, const std::optional<BoxSize>& box,
                                 const ComputeOptions& opts = {});

// One convolution on the search map plus the cached broadcast terms.
Tensor acm_apply_search(const TemplateCache& cache, const Tensor& search, const FusionWeights& w,
                        bool apply_relu, const ComputeOptions& opts = {});

}  // namespace acm
