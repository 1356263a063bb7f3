// Copyright 2026 The StepGAN Workbench Authors.
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

#include "stepgan/vocabulary.hpp"
#include "stepgan/random.hpp"
#include "stepgan/counting_task.hpp"
#include "stepgan/tensor.hpp"
#include "stepgan/gru.hpp"
#include "stepgan/seq2seq.hpp"
#include "stepgan/generator.hpp"
#include "stepgan/scorer.hpp"
#include "stepgan/decoding.hpp"
#include "stepgan/optimizer.hpp"
#include "stepgan/checkpoint.hpp"
#include "stepgan/credit_assignment.hpp"
#include "stepgan/evaluation.hpp"
#include "stepgan/training.hpp"
#include "stepgan/config.hpp"
#include "stepgan/experiment.hpp"
