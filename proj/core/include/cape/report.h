// Copyright 2026 The CaPE Lab Authors.
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

#ifndef CAPE_REPORT_H_
#define CAPE_REPORT_H_

#include <filesystem>
#include <span>
#include <string>

#include "cape/harness.h"

namespace cape {

// Header: alpha,D_arc,D_sum,E-P_src,E-R_ref,R1,R2,RL,len
std::string SweepCsv(const SweepResult& sweep);
// Same columns with a leading mode column, one block per sweep.
std::string ComparisonCsv(std::span<const SweepResult> sweeps);

// One panel per metric, one polyline per sweep. Byte-stable for equal input.
std::string RenderSweepSvg(std::span<const SweepResult> sweeps, const std::string& title);

// Writes <stem>.csv and <stem>.svg.
void EmitReport(std::span<const SweepResult> sweeps, const std::filesystem::path& stem,
                const std::string& title);

}  // namespace cape

#endif  // CAPE_REPORT_H_
