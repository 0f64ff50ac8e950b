// Copyright 2026 The Recycle Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "recycle/dataset.hpp"
#include "recycle/gateway.hpp"

namespace recycle::metrics {

// exp(-mean logprob) over the scored continuation. Throws kEmptySpan.
double perplexity(const oracle::TokenLogprobs& logprobs);

// Cosine similarity clamped to [-1, 1]. Throws kZeroVector when either input
// has zero norm, kPreconditionViolation on a dimension mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct MetricsConfig {
  // Appended to the instruction when it conditions the response.
  std::string context_separator = "\n";
  int concurrency = 1;
};

struct IfdResult {
  double ifd = 0.0;
  bool flagged = false;  // ifd > 1: the instruction made the response harder
  double conditional_ppl = 0.0;
  double unconditional_ppl = 0.0;
  std::size_t response_tokens = 0;
};

// ppl(response | instruction) / ppl(response).
IfdResult ifd_score(oracle::OracleGateway& gateway,
                    std::string_view instruction, std::string_view response,
                    const MetricsConfig& config = {});

// Cosine of the two embeddings; symmetric in its arguments.
double coherence(oracle::OracleGateway& gateway, std::string_view instruction,
                 std::string_view response);

struct SampleMetrics {
  std::string record_id;
  std::size_t ins_tokens = 0;
  std::size_t res_tokens = 0;
  double ins_ppl = 0.0;
  double res_ppl_uncond = 0.0;
  double res_ppl_cond = 0.0;
  double coherence = 0.0;
  double ifd = 0.0;
  bool ifd_flagged = false;
};

SampleMetrics score_sample(oracle::OracleGateway& gateway,
                           const DatasetRecord& record,
                           const MetricsConfig& config = {});

struct MetricMeans {
  double ins_tokens = 0.0;
  double res_tokens = 0.0;
  double ins_ppl = 0.0;
  double res_ppl_uncond = 0.0;
  double res_ppl_cond = 0.0;
  double coherence = 0.0;
  double ifd = 0.0;
};

struct ScoringFailure {
  std::string record_id;
  std::string reason;
};

// Arithmetic means over successfully scored samples (per-sample perplexity
// means, not corpus perplexity).
struct MetricsReport {
  std::string label;
  std::size_t n = 0;
  std::size_t n_success = 0;
  std::size_t n_failed = 0;
  std::size_t ifd_flagged = 0;
  MetricMeans means;
  std::vector<SampleMetrics> samples;  // input order, successes only
  std::vector<ScoringFailure> failures;
};

MetricMeans mean_of(std::span<const SampleMetrics> samples);

// Scores every record. Records whose scoring fails are counted and excluded;
// a replay miss is not a scoring failure and aborts the report. Throws
// kAllRecordsFailed when nothing scored, kEmptyDataset for no records.
MetricsReport dataset_report(const DatasetFile& dataset,
                             oracle::OracleGateway& gateway,
                             std::string label,
                             const MetricsConfig& config = {});

nlohmann::ordered_json to_json(const MetricsReport& report,
                               bool include_samples = true);

// Metric rows, one column per report.
std::string format_report_table(std::span<const MetricsReport> reports);

}  // namespace recycle::metrics
