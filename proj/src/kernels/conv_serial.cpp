// Copyright 2026 The wseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wseg/kernels/conv.hpp"

namespace wseg::kernels::serial {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output) {
  const int oh_n = g.out_h();
  const int ow_n = g.out_w();
  for (int n = 0; n < g.batch; ++n) {
    for (int co = 0; co < g.out_channels; ++co) {
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (int ci = 0; ci < g.in_channels; ++ci) {
            for (int kh = 0; kh < g.kernel_h; ++kh) {
              const int ih = oh * g.stride - g.pad_h + kh * g.dilation;
              if (ih < 0 || ih >= g.in_h) continue;
              for (int kw = 0; kw < g.kernel_w; ++kw) {
                const int iw = ow * g.stride - g.pad_w + kw * g.dilation;
                if (iw < 0 || iw >= g.in_w) continue;
                acc += input[((static_cast<std::size_t>(n) * g.in_channels +
                               ci) * g.in_h + ih) * g.in_w + iw] *
                       weight[((static_cast<std::size_t>(co) * g.in_channels +
                                ci) * g.kernel_h + kh) * g.kernel_w + kw];
              }
            }
          }
          output[((static_cast<std::size_t>(n) * g.out_channels + co) * oh_n +
                  oh) * ow_n + ow] = acc;
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g,
                           std::span<const double> grad_output,
                           std::span<const double> weight,
                           std::span<double> grad_input) {
  const int oh_n = g.out_h();
  const int ow_n = g.out_w();
  for (int n = 0; n < g.batch; ++n) {
    for (int co = 0; co < g.out_channels; ++co) {
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow) {
          const double go =
              grad_output[((static_cast<std::size_t>(n) * g.out_channels +
                            co) * oh_n + oh) * ow_n + ow];
          for (int ci = 0; ci < g.in_channels; ++ci) {
            for (int kh = 0; kh < g.kernel_h; ++kh) {
              const int ih = oh * g.stride - g.pad_h + kh * g.dilation;
              if (ih < 0 || ih >= g.in_h) continue;
              for (int kw = 0; kw < g.kernel_w; ++kw) {
                const int iw = ow * g.stride - g.pad_w + kw * g.dilation;
                if (iw < 0 || iw >= g.in_w) continue;
                grad_input[((static_cast<std::size_t>(n) * g.in_channels +
                             ci) * g.in_h + ih) * g.in_w + iw] +=
                    go *
                    weight[((static_cast<std::size_t>(co) * g.in_channels +
                             ci) * g.kernel_h + kh) * g.kernel_w + kw];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g,
                            std::span<const double> grad_output,
                            std::span<const double> input,
                            std::span<double> grad_weight,
                            std::span<double> grad_bias) {
  const int oh_n = g.out_h();
  const int ow_n = g.out_w();
  for (int n = 0; n < g.batch; ++n) {
    for (int co = 0; co < g.out_channels; ++co) {
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow) {
          const double go =
              grad_output[((static_cast<std::size_t>(n) * g.out_channels +
                            co) * oh_n + oh) * ow_n + ow];
          if (!grad_bias.empty()) grad_bias[co] += go;
          for (int ci = 0; ci < g.in_channels; ++ci) {
            for (int kh = 0; kh < g.kernel_h; ++kh) {
              const int ih = oh * g.stride - g.pad_h + kh * g.dilation;
              if (ih < 0 || ih >= g.in_h) continue;
              for (int kw = 0; kw < g.kernel_w; ++kw) {
                const int iw = ow * g.stride - g.pad_w + kw * g.dilation;
                if (iw < 0 || iw >= g.in_w) continue;
                grad_weight[((static_cast<std::size_t>(co) * g.in_channels +
                              ci) * g.kernel_h + kh) * g.kernel_w + kw] +=
                    go * input[((static_cast<std::size_t>(n) * g.in_channels +
                                 ci) * g.in_h + ih) * g.in_w + iw];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace wseg::kernels::serial
