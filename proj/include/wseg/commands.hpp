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

// Subcommands behind the wseg executable. Each returns the process exit code
// and reports failures by throwing wseg::Error.

#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string_view>
#include <vector>

#include "wseg/config.hpp"
#include "wseg/raster.hpp"

namespace wseg {

int cmd_gen_data(const RunConfig& rc, std::ostream& out, std::ostream& err);
int cmd_train(const RunConfig& rc, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& rc, std::ostream& out, std::ostream& err);
int cmd_predict(const RunConfig& rc, std::ostream& out, std::ostream& err);
int cmd_params(const RunConfig& rc, std::ostream& out, std::ostream& err);
int cmd_bench(const RunConfig& rc, std::ostream& out, std::ostream& err);

const std::vector<std::string_view>& command_names();
int run_command(std::string_view name, const RunConfig& rc, std::ostream& out,
                std::ostream& err);

// 19-entry RGB palette indexed by class id (wraps for larger ids).
const std::array<std::array<std::uint8_t, 3>, 19>& class_palette();
Image colorize(const LabelMap& labels);
// round(0.5 * image + 0.5 * mask) per 8-bit channel value.
Image overlay(const Image& image, const Image& mask);

// Median and interquartile range with linear interpolation between order
// statistics.
struct Spread {
  double median = 0.0;
  double iqr = 0.0;
};
Spread median_iqr(std::vector<double> values);

}  // namespace wseg
