// Copyright 2026 The dval Authors.
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

#ifndef DVAL_DVAL_HPP
#define DVAL_DVAL_HPP

#include "dval/analysis.hpp"
#include "dval/common.hpp"
#include "dval/dataset.hpp"
#include "dval/harness.hpp"
#include "dval/io.hpp"
#include "dval/knn_values.hpp"
#include "dval/oracles.hpp"
#include "dval/synthetic.hpp"

#endif  // DVAL_DVAL_HPP
