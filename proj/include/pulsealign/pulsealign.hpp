// Copyright 2026 The pulsealign Authors
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

#pragma once

#include "pulsealign/annotate.hpp"
#include "pulsealign/baseline.hpp"
#include "pulsealign/error.hpp"
#include "pulsealign/ingest.hpp"
#include "pulsealign/pipeline.hpp"
#include "pulsealign/report.hpp"
#include "pulsealign/sigproc.hpp"
#include "pulsealign/synth.hpp"
#include "pulsealign/timebase.hpp"
